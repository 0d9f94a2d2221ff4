//! Semantic model: types, members, attributes and resolved method bodies.
//!
//! Types are identified by their printed name (`Socket`, `List<Socket>`,
//! `int`). The built-in library is declared by an embedded MiniOO prelude and
//! marked `builtin`.

mod body;
mod overlay;
mod rtype;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::frontend::{self, AttrKind, AttributeSpec, ClassDecl, CompilationUnit, Span, TypeExpr};

pub use body::{is_scalar_type, AssignTarget, Body, ExprId, ExprInfo, IrCatch, IrExpr, IrStmt, IrStmtKind, Receiver, VarId, VarInfo};
pub use overlay::{apply_overlay, same_file, ElementKind, OverlayEntry};
pub use rtype::{compute_rtype, rtype_step};

pub const PRELUDE_PATH: &str = "<builtin>";
const PRELUDE: &str = include_str!("prelude.moo");

pub const PRIMITIVES: [&str; 4] = ["int", "bool", "string", "void"];
/// Static type of the `null` literal.
pub const NULL_TYPE: &str = "null";
/// Static type of expressions whose resolution failed.
pub const UNKNOWN_TYPE: &str = "?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MethodId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelErrorKind {
    DuplicateType,
    DuplicateMember,
    UnresolvedType,
    UnresolvedName,
    UnresolvedMember,
    InvalidAttribute,
    SupertypeCycle,
    OverlayBinding,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{file}:{span}: {message}")]
pub struct ModelError {
    pub kind: ModelErrorKind,
    pub file: String,
    pub span: Span,
    pub message: String,
}

impl ModelError {
    fn new(kind: ModelErrorKind, file: &str, span: Span, message: impl Into<String>) -> Self {
        ModelError { kind, file: file.to_string(), span, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Origin {
    Builtin,
    Source,
    Overlay,
}

/// A program element that can carry attributes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ElementRef {
    Type(String),
    Field { owner: String, name: String },
    Method(MethodId),
    Return(MethodId),
    Param(MethodId, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub element: ElementRef,
    pub attr: AttributeSpec,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldInfo {
    pub name: String,
    pub ty: String,
    pub readonly: bool,
    pub is_static: bool,
    pub attributes: Vec<AttributeSpec>,
    pub span: Span,
}

impl FieldInfo {
    pub fn is_owning(&self) -> bool {
        has(&self.attributes, AttrKind::Owning)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: String,
    pub ty: String,
    pub attributes: Vec<AttributeSpec>,
    pub span: Span,
}

impl ParamInfo {
    pub fn has(&self, kind: AttrKind) -> bool {
        has(&self.attributes, kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeInfo {
    pub name: String,
    pub declared_supertype: Option<String>,
    pub implements_disposable: bool,
    pub is_collection_of: Option<String>,
    pub fields: Vec<FieldInfo>,
    pub methods: Vec<MethodId>,
    pub attributes: Vec<AttributeSpec>,
    pub builtin: bool,
    pub file: String,
    /// Span of the name token.
    pub span: Span,
}

impl TypeInfo {
    pub fn field(&self, name: &str) -> Option<&FieldInfo> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn declared_must_call(&self) -> Option<&str> {
        self.attributes.iter().find(|a| a.kind == AttrKind::MustCall).and_then(|a| a.args.first()).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodInfo {
    pub id: MethodId,
    pub name: String,
    pub owner: String,
    pub is_ctor: bool,
    pub is_static: bool,
    pub params: Vec<ParamInfo>,
    /// `void` for procedures; the owner type for constructors.
    pub ret: String,
    pub return_attrs: Vec<AttributeSpec>,
    /// EnsuresCalledMethods / CreateMustCallFor.
    pub attrs: Vec<AttributeSpec>,
    pub body: Option<Body>,
    pub builtin: bool,
    pub file: String,
    /// Span of the name token.
    pub span: Span,
}

impl MethodInfo {
    pub fn returns(&self, kind: AttrKind) -> bool {
        has(&self.return_attrs, kind)
    }

    pub fn param_has(&self, index: usize, kind: AttrKind) -> bool {
        self.params.get(index).is_some_and(|p| p.has(kind))
    }

    /// `(field, method)` of the EnsuresCalledMethods attribute, if any.
    pub fn ensures_called_methods(&self) -> Option<(&str, &str)> {
        self.attrs
            .iter()
            .find(|a| a.kind == AttrKind::EnsuresCalledMethods && a.args.len() == 2)
            .map(|a| (a.args[0].as_str(), a.args[1].as_str()))
    }

    pub fn create_must_call_for(&self) -> Option<&str> {
        self.attrs
            .iter()
            .find(|a| a.kind == AttrKind::CreateMustCallFor && a.args.len() == 1)
            .map(|a| a.args[0].as_str())
    }

    pub fn qualified_name(&self) -> String {
        format!("{}.{}", self.owner, self.name)
    }
}

fn has(attrs: &[AttributeSpec], kind: AttrKind) -> bool {
    attrs.iter().any(|a| a.kind == kind)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SemanticModel {
    pub types: BTreeMap<String, TypeInfo>,
    pub methods: Vec<MethodInfo>,
    pub rtype: BTreeSet<String>,
    pub provenance: Vec<Provenance>,
    /// Direct subtypes by supertype name.
    subtypes: BTreeMap<String, BTreeSet<String>>,
}

impl SemanticModel {
    pub fn type_info(&self, name: &str) -> Option<&TypeInfo> {
        self.types.get(name)
    }

    pub fn method(&self, id: MethodId) -> &MethodInfo {
        &self.methods[id.0]
    }

    pub fn is_known_type(&self, name: &str) -> bool {
        PRIMITIVES.contains(&name) || self.types.contains_key(name)
    }

    /// `name` followed by its declared supertypes, nearest first. Stops on cycles.
    pub fn supertype_chain(&self, name: &str) -> Vec<&TypeInfo> {
        let mut out: Vec<&TypeInfo> = Vec::new();
        let mut cur = self.types.get(name);
        while let Some(t) = cur {
            if out.iter().any(|seen| seen.name == t.name) {
                break;
            }
            out.push(t);
            cur = t.declared_supertype.as_deref().and_then(|s| self.types.get(s));
        }
        out
    }

    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        self.supertype_chain(sub).iter().any(|t| t.name == sup)
    }

    /// Every transitive subtype of `name`, excluding `name` itself.
    pub fn transitive_subtypes(&self, name: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![name.to_string()];
        while let Some(t) = stack.pop() {
            for s in self.subtypes.get(&t).into_iter().flatten() {
                if s != name && out.insert(s.clone()) {
                    stack.push(s.clone());
                }
            }
        }
        out
    }

    /// Finds a field by name on `ty` or its supertypes; returns the declaring type.
    pub fn find_field(&self, ty: &str, field: &str) -> Option<(&TypeInfo, &FieldInfo)> {
        self.supertype_chain(ty).into_iter().find_map(|t| t.field(field).map(|f| (t, f)))
    }

    fn own_methods<'a>(&'a self, ty: &'a TypeInfo, name: &'a str, arity: usize) -> impl Iterator<Item = MethodId> + 'a {
        ty.methods.iter().copied().filter(move |&m| {
            let info = self.method(m);
            !info.is_ctor && info.name == name && info.params.len() == arity
        })
    }

    /// Static lookup: nearest declaration along the supertype chain.
    pub fn lookup_method(&self, ty: &str, name: &str, arity: usize) -> Option<MethodId> {
        self.supertype_chain(ty).into_iter().find_map(|t| self.own_methods(t, name, arity).next())
    }

    pub fn has_method_named(&self, ty: &str, name: &str) -> bool {
        self.supertype_chain(ty)
            .into_iter()
            .any(|t| t.methods.iter().any(|&m| !self.method(m).is_ctor && self.method(m).name == name))
    }

    /// Static target plus overrides in transitive subtypes of `receiver_ty`
    /// (the latter only when `dispatch` is virtual).
    pub fn resolve_call(&self, receiver_ty: &str, name: &str, arity: usize, virtual_dispatch: bool) -> Vec<MethodId> {
        let Some(target) = self.lookup_method(receiver_ty, name, arity) else {
            return Vec::new();
        };
        let mut out = vec![target];
        if virtual_dispatch && !self.method(target).is_static {
            for sub in self.transitive_subtypes(receiver_ty) {
                if let Some(t) = self.types.get(&sub) {
                    out.extend(self.own_methods(t, name, arity));
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn constructors(&self, ty: &str, arity: usize) -> Vec<MethodId> {
        self.types
            .get(ty)
            .map(|t| {
                t.methods
                    .iter()
                    .copied()
                    .filter(|&m| self.method(m).is_ctor && self.method(m).params.len() == arity)
                    .collect()
            })
            .unwrap_or_default()
    }

    pub fn in_rtype(&self, ty: &str) -> bool {
        self.rtype.contains(ty)
    }

    /// True if `ty` or a supertype implements IDisposable.
    pub fn is_disposable(&self, ty: &str) -> bool {
        self.supertype_chain(ty).iter().any(|t| t.implements_disposable)
    }

    /// Release method required by `ty`: its own MustCall, else the implicit
    /// Dispose of IDisposable, else the nearest supertype's.
    pub fn must_call(&self, ty: &str) -> Option<&str> {
        self.supertype_chain(ty)
            .into_iter()
            .find_map(|t| t.declared_must_call().or(t.implements_disposable.then_some("Dispose")))
    }

    /// Methods declared in source files that have a body.
    pub fn user_methods(&self) -> impl Iterator<Item = &MethodInfo> {
        self.methods.iter().filter(|m| !m.builtin && m.body.is_some())
    }

    pub fn user_types(&self) -> impl Iterator<Item = &TypeInfo> {
        self.types.values().filter(|t| !t.builtin)
    }

    /// Attribute occurrences by kind, excluding the built-in prelude.
    pub fn attribute_counts(&self) -> BTreeMap<AttrKind, usize> {
        let mut out = BTreeMap::new();
        for p in self.provenance.iter().filter(|p| p.origin != Origin::Builtin) {
            *out.entry(p.attr.kind).or_insert(0) += 1;
        }
        out
    }

    fn rebuild_subtypes(&mut self) {
        self.subtypes.clear();
        for t in self.types.values() {
            if let Some(s) = &t.declared_supertype {
                self.subtypes.entry(s.clone()).or_default().insert(t.name.clone());
            }
        }
    }

    /// Attributes attached to an element, mutable. Used by overlay binding.
    fn attrs_mut(&mut self, element: &ElementRef) -> Option<&mut Vec<AttributeSpec>> {
        match element {
            ElementRef::Type(t) => self.types.get_mut(t).map(|t| &mut t.attributes),
            ElementRef::Field { owner, name } => self
                .types
                .get_mut(owner)
                .and_then(|t| t.fields.iter_mut().find(|f| &f.name == name))
                .map(|f| &mut f.attributes),
            ElementRef::Method(m) => self.methods.get_mut(m.0).map(|m| &mut m.attrs),
            ElementRef::Return(m) => self.methods.get_mut(m.0).map(|m| &mut m.return_attrs),
            ElementRef::Param(m, i) => self.methods.get_mut(m.0).and_then(|m| m.params.get_mut(*i)).map(|p| &mut p.attributes),
        }
    }
}

/// Builds the model for `units` on top of the built-in prelude. Resolution
/// problems are collected; the model is always usable.
pub fn build_model(units: &[CompilationUnit]) -> (SemanticModel, Vec<ModelError>) {
    let prelude = frontend::parse_source(PRELUDE_PATH, PRELUDE).expect("built-in prelude parses");
    let mut b = Builder::default();
    b.declare_unit(&prelude, true);
    for u in units {
        b.declare_unit(u, false);
    }
    let all: Vec<(&CompilationUnit, bool)> =
        std::iter::once((&prelude, true)).chain(units.iter().map(|u| (u, false))).collect();
    for (u, _) in &all {
        b.instantiate_collections(u);
    }
    for (u, builtin) in &all {
        b.members(u, *builtin);
    }
    b.check_supertypes();
    b.model.rebuild_subtypes();
    b.check_attribute_references();

    let mut bodies = Vec::new();
    for (id, decl, file) in &b.pending_bodies {
        let info = b.model.method(*id);
        let (body, errs) = body::lower(&b.model, info, decl, file);
        bodies.push((*id, body));
        b.errors.extend(errs);
    }
    for (id, body) in bodies {
        b.model.methods[id.0].body = Some(body);
    }
    b.model.rtype = compute_rtype(&b.model);
    (b.model, b.errors)
}

#[derive(Default)]
struct Builder<'a> {
    model: SemanticModel,
    errors: Vec<ModelError>,
    /// Class declarations accepted (first of each name).
    accepted: BTreeSet<(String, String, Span)>,
    pending_bodies: Vec<(MethodId, &'a frontend::MethodDecl, String)>,
}

impl<'a> Builder<'a> {
    fn err(&mut self, kind: ModelErrorKind, file: &str, span: Span, message: impl Into<String>) {
        self.errors.push(ModelError::new(kind, file, span, message));
    }

    fn declare_unit(&mut self, unit: &CompilationUnit, builtin: bool) {
        for c in &unit.classes {
            let name = &c.name.name;
            if self.model.types.contains_key(name) || PRIMITIVES.contains(&name.as_str()) || name == "List" {
                self.err(ModelErrorKind::DuplicateType, &unit.path, c.name.span, format!("duplicate type `{name}`"));
                continue;
            }
            self.accepted.insert((unit.path.clone(), name.clone(), c.name.span));
            self.model.types.insert(
                name.clone(),
                TypeInfo {
                    name: name.clone(),
                    declared_supertype: c.base.as_ref().map(|t| t.to_string()),
                    implements_disposable: c.interface.is_some(),
                    is_collection_of: None,
                    fields: Vec::new(),
                    methods: Vec::new(),
                    attributes: Vec::new(),
                    builtin,
                    file: unit.path.clone(),
                    span: c.name.span,
                },
            );
        }
    }

    fn is_accepted(&self, file: &str, c: &ClassDecl) -> bool {
        self.accepted.contains(&(file.to_string(), c.name.name.clone(), c.name.span))
    }

    /// Creates `List<T>` instantiations for every generic type written anywhere.
    fn instantiate_collections(&mut self, unit: &CompilationUnit) {
        let mut found = Vec::new();
        for c in &unit.classes {
            found.extend(c.base.iter().cloned());
            for f in c.fields() {
                found.push(f.ty.clone());
            }
            for m in c.methods() {
                found.extend(m.ret.iter().cloned());
                found.extend(m.params.iter().map(|p| p.ty.clone()));
                if let Some(b) = &m.body {
                    body::collect_types(&b.stmts, &mut found);
                }
            }
        }
        for t in found {
            self.instantiate(&t);
        }
    }

    fn instantiate(&mut self, t: &TypeExpr) {
        let Some(arg) = &t.arg else { return };
        self.instantiate(arg);
        if t.name != "List" {
            return;
        }
        let name = t.to_string();
        if self.model.types.contains_key(&name) {
            return;
        }
        let elem = arg.to_string();
        let mut info = TypeInfo {
            name: name.clone(),
            declared_supertype: None,
            implements_disposable: false,
            is_collection_of: Some(elem.clone()),
            fields: Vec::new(),
            methods: Vec::new(),
            attributes: Vec::new(),
            builtin: true,
            file: PRELUDE_PATH.to_string(),
            span: Span::default(),
        };
        type Member<'a> = (&'a str, bool, Vec<(&'a str, String)>, String);
        let members: [Member; 5] = [
            (name.as_str(), true, vec![], name.clone()),
            ("Add", false, vec![("item", elem.clone())], "void".into()),
            ("Get", false, vec![("index", "int".into())], elem.clone()),
            ("Count", false, vec![], "int".into()),
            ("Clear", false, vec![], "void".into()),
        ];
        for (mname, is_ctor, params, ret) in members {
            let id = MethodId(self.model.methods.len());
            self.model.methods.push(MethodInfo {
                id,
                name: mname.to_string(),
                owner: name.clone(),
                is_ctor,
                is_static: false,
                params: params
                    .into_iter()
                    .map(|(n, ty)| ParamInfo { name: n.into(), ty, attributes: Vec::new(), span: Span::default() })
                    .collect(),
                ret,
                return_attrs: Vec::new(),
                attrs: Vec::new(),
                body: None,
                builtin: true,
                file: PRELUDE_PATH.to_string(),
                span: Span::default(),
            });
            info.methods.push(id);
        }
        self.model.types.insert(name, info);
    }

    fn check_type(&mut self, file: &str, t: &TypeExpr) -> String {
        let name = t.to_string();
        if !self.model.is_known_type(&name) {
            self.err(ModelErrorKind::UnresolvedType, file, t.span, format!("unknown type `{name}`"));
        }
        name
    }

    fn record(&mut self, element: ElementRef, attr: &AttributeSpec, builtin: bool) {
        let origin = if builtin { Origin::Builtin } else { Origin::Source };
        self.model.provenance.push(Provenance { element, attr: attr.clone(), origin });
    }

    fn members(&mut self, unit: &'a CompilationUnit, builtin: bool) {
        let file = unit.path.as_str();
        for c in &unit.classes {
            if !self.is_accepted(file, c) {
                continue;
            }
            let tname = c.name.name.clone();
            if let Some(iface) = &c.interface {
                if iface.name != "IDisposable" || iface.arg.is_some() {
                    self.err(ModelErrorKind::UnresolvedType, file, iface.span, format!("unknown interface `{iface}`"));
                }
            }
            let mut type_attrs = Vec::new();
            for a in &c.attrs {
                if a.kind == AttrKind::MustCall {
                    if type_attrs.iter().any(|x: &AttributeSpec| x.kind == AttrKind::MustCall) {
                        self.err(ModelErrorKind::InvalidAttribute, file, a.span, "multiple MustCall attributes on one type");
                        continue;
                    }
                    type_attrs.push(a.clone());
                    self.record(ElementRef::Type(tname.clone()), a, builtin);
                } else {
                    self.err(ModelErrorKind::InvalidAttribute, file, a.span, format!("{} is not allowed on a type", a.kind));
                }
            }

            let mut fields: Vec<FieldInfo> = Vec::new();
            for f in c.fields() {
                let ty = self.check_type(file, &f.ty);
                if fields.iter().any(|x| x.name == f.name.name) {
                    self.err(ModelErrorKind::DuplicateMember, file, f.name.span, format!("duplicate field `{}`", f.name.name));
                    continue;
                }
                let mut attrs = Vec::new();
                for a in &f.attrs {
                    if a.kind == AttrKind::Owning && !has(&attrs, AttrKind::Owning) {
                        attrs.push(a.clone());
                        self.record(ElementRef::Field { owner: tname.clone(), name: f.name.name.clone() }, a, builtin);
                    } else {
                        self.err(ModelErrorKind::InvalidAttribute, file, a.span, format!("{} is not allowed on a field", a.kind));
                    }
                }
                fields.push(FieldInfo {
                    name: f.name.name.clone(),
                    ty,
                    readonly: f.is_readonly(),
                    is_static: f.modifiers.contains(&frontend::Modifier::Static),
                    attributes: attrs,
                    span: f.name.span,
                });
            }

            let mut method_ids = Vec::new();
            for m in c.methods() {
                let arity = m.params.len();
                let dup = method_ids.iter().any(|&id: &MethodId| {
                    let o = self.model.method(id);
                    o.name == m.name.name && o.params.len() == arity && o.is_ctor == m.is_ctor()
                });
                if dup {
                    self.err(
                        ModelErrorKind::DuplicateMember,
                        file,
                        m.name.span,
                        format!("duplicate method `{}` with {arity} parameter(s)", m.name.name),
                    );
                    continue;
                }
                let id = MethodId(self.model.methods.len());
                let ret = match &m.ret {
                    Some(t) => self.check_type(file, t),
                    None => tname.clone(),
                };
                let mut params = Vec::new();
                for (i, p) in m.params.iter().enumerate() {
                    let ty = self.check_type(file, &p.ty);
                    let mut attrs: Vec<AttributeSpec> = Vec::new();
                    for a in &p.attrs {
                        if matches!(a.kind, AttrKind::Owning | AttrKind::MustCallAlias) && !has(&attrs, a.kind) {
                            attrs.push(a.clone());
                            self.record(ElementRef::Param(id, i), a, builtin);
                        } else {
                            self.err(
                                ModelErrorKind::InvalidAttribute,
                                file,
                                a.span,
                                format!("{} is not allowed on a parameter", a.kind),
                            );
                        }
                    }
                    params.push(ParamInfo { name: p.name.name.clone(), ty, attributes: attrs, span: p.name.span });
                }
                let mut return_attrs: Vec<AttributeSpec> = Vec::new();
                let mut attrs: Vec<AttributeSpec> = Vec::new();
                for a in &m.attrs {
                    let (slot, element) = match a.kind {
                        AttrKind::MustCallAlias => (&mut return_attrs, ElementRef::Return(id)),
                        AttrKind::Owning if !m.is_ctor() => (&mut return_attrs, ElementRef::Return(id)),
                        AttrKind::EnsuresCalledMethods | AttrKind::CreateMustCallFor => (&mut attrs, ElementRef::Method(id)),
                        _ => {
                            let place = if m.is_ctor() { "a constructor" } else { "a method" };
                            self.err(ModelErrorKind::InvalidAttribute, file, a.span, format!("{} is not allowed on {place}", a.kind));
                            continue;
                        }
                    };
                    if has(slot, a.kind) {
                        self.err(ModelErrorKind::InvalidAttribute, file, a.span, format!("multiple {} attributes on one method", a.kind));
                        continue;
                    }
                    slot.push(a.clone());
                    self.record(element, a, builtin);
                }
                self.model.methods.push(MethodInfo {
                    id,
                    name: m.name.name.clone(),
                    owner: tname.clone(),
                    is_ctor: m.is_ctor(),
                    is_static: m.is_static(),
                    params,
                    ret,
                    return_attrs,
                    attrs,
                    body: None,
                    builtin,
                    file: file.to_string(),
                    span: m.name.span,
                });
                method_ids.push(id);
                if m.body.is_some() {
                    self.pending_bodies.push((id, m, file.to_string()));
                }
            }
            if !method_ids.iter().any(|&id| self.model.method(id).is_ctor) {
                let id = MethodId(self.model.methods.len());
                self.model.methods.push(MethodInfo {
                    id,
                    name: tname.clone(),
                    owner: tname.clone(),
                    is_ctor: true,
                    is_static: false,
                    params: Vec::new(),
                    ret: tname.clone(),
                    return_attrs: Vec::new(),
                    attrs: Vec::new(),
                    body: None,
                    builtin: true,
                    file: file.to_string(),
                    span: c.name.span,
                });
                method_ids.push(id);
            }

            let t = self.model.types.get_mut(&tname).expect("declared");
            t.attributes = type_attrs;
            t.fields = fields;
            t.methods = method_ids;
        }
    }

    fn check_supertypes(&mut self) {
        let names: Vec<String> = self.model.types.keys().cloned().collect();
        for name in &names {
            let t = &self.model.types[name];
            let Some(sup) = t.declared_supertype.clone() else { continue };
            let (file, span) = (t.file.clone(), t.span);
            if !self.model.types.contains_key(&sup) {
                self.err(ModelErrorKind::UnresolvedType, &file, span, format!("unknown supertype `{sup}` of `{name}`"));
                self.model.types.get_mut(name).expect("exists").declared_supertype = None;
                continue;
            }
            // walk upward; revisiting `name` means a cycle
            let mut cur = Some(sup);
            let mut steps = 0;
            while let Some(c) = cur {
                if &c == name {
                    self.err(ModelErrorKind::SupertypeCycle, &file, span, format!("`{name}` is its own supertype"));
                    self.model.types.get_mut(name).expect("exists").declared_supertype = None;
                    break;
                }
                steps += 1;
                if steps > names.len() {
                    break;
                }
                cur = self.model.types.get(&c).and_then(|t| t.declared_supertype.clone());
            }
        }
    }

    fn check_attribute_references(&mut self) {
        let errs = attribute_reference_errors(&self.model);
        self.errors.extend(errs);
    }
}

/// Field and method names inside attributes must resolve.
fn attribute_reference_errors(model: &SemanticModel) -> Vec<ModelError> {
    let mut out = Vec::new();
    for t in model.types.values() {
        if let Some(m) = t.declared_must_call() {
            if !model.has_method_named(&t.name, m) {
                let span = t.attributes.iter().find(|a| a.kind == AttrKind::MustCall).map_or(t.span, |a| a.span);
                out.push(ModelError::new(
                    ModelErrorKind::UnresolvedMember,
                    &t.file,
                    span,
                    format!("MustCall names unknown method `{m}` of `{}`", t.name),
                ));
            }
        }
    }
    for m in &model.methods {
        for a in &m.attrs {
            let Some(field) = a.args.first() else { continue };
            match model.find_field(&m.owner, field) {
                None => out.push(ModelError::new(
                    ModelErrorKind::UnresolvedMember,
                    &m.file,
                    a.span,
                    format!("{} names unknown field `{field}` of `{}`", a.kind, m.owner),
                )),
                Some((_, f)) if a.kind == AttrKind::EnsuresCalledMethods => {
                    let called = &a.args[1];
                    if model.is_known_type(&f.ty) && !PRIMITIVES.contains(&f.ty.as_str()) && !model.has_method_named(&f.ty, called) {
                        out.push(ModelError::new(
                            ModelErrorKind::UnresolvedMember,
                            &m.file,
                            a.span,
                            format!("EnsuresCalledMethods names unknown method `{called}` of `{}`", f.ty),
                        ));
                    }
                }
                Some(_) => {}
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    fn model(src: &str) -> (SemanticModel, Vec<ModelError>) {
        build_model(&[parse_source("t.moo", src).unwrap()])
    }

    #[test]
    fn prelude_builds_cleanly() {
        let (m, errs) = build_model(&[]);
        assert!(errs.is_empty(), "{errs:?}");
        for t in ["Socket", "Stream", "StreamReader", "SqlDataReader", "SqlCommand", "SqlConnection"] {
            assert!(m.types[t].implements_disposable, "{t}");
            assert!(m.in_rtype(t), "{t}");
            assert_eq!(m.must_call(t), Some("Dispose"));
        }
        assert!(m.attribute_counts().is_empty());
    }

    #[test]
    fn container_with_owning_field() {
        let (m, errs) = model(
            "[MustCall(Dispose)]
             class Container : IDisposable {
                 [Owning] private readonly Socket socket;
                 [EnsuresCalledMethods(socket, Dispose)]
                 public void Dispose() { socket.Dispose(); }
             }",
        );
        assert!(errs.is_empty(), "{errs:?}");
        let c = &m.types["Container"];
        assert!(c.field("socket").unwrap().is_owning());
        assert!(c.field("socket").unwrap().readonly);
        let d = m.lookup_method("Container", "Dispose", 0).unwrap();
        assert_eq!(m.method(d).ensures_called_methods(), Some(("socket", "Dispose")));
        let counts = m.attribute_counts();
        assert_eq!(counts.get(&AttrKind::MustCall), Some(&1));
        assert_eq!(counts.get(&AttrKind::Owning), Some(&1));
        assert_eq!(counts.get(&AttrKind::EnsuresCalledMethods), Some(&1));
    }

    #[test]
    fn empty_unit() {
        let (m, errs) = model("");
        assert!(errs.is_empty());
        assert_eq!(m.user_types().count(), 0);
    }

    #[test]
    fn duplicate_type() {
        let (_, errs) = model("class C { } class C { }");
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].kind, ModelErrorKind::DuplicateType);
        let (_, errs) = model("class Socket { }");
        assert_eq!(errs[0].kind, ModelErrorKind::DuplicateType);
    }

    #[test]
    fn unresolved_references() {
        let (_, errs) = model("class A : Missing { Nope f; void m() { q(); } }");
        let kinds: Vec<_> = errs.iter().map(|e| e.kind).collect();
        assert!(kinds.contains(&ModelErrorKind::UnresolvedType));
        assert!(kinds.contains(&ModelErrorKind::UnresolvedMember));
    }

    #[test]
    fn supertype_cycle() {
        let (m, errs) = model("class A : B { } class B : A { }");
        assert!(errs.iter().any(|e| e.kind == ModelErrorKind::SupertypeCycle));
        assert!(m.supertype_chain("A").len() <= 2);
    }

    #[test]
    fn misplaced_and_multiple_attributes() {
        let (_, errs) = model("[Owning] class A { [MustCall(x)] int f; }");
        assert_eq!(errs.iter().filter(|e| e.kind == ModelErrorKind::InvalidAttribute).count(), 2);
        let (_, errs) = model(
            "class A { Socket f; Socket g;
               [CreateMustCallFor(f)] [CreateMustCallFor(g)] void m() { } }",
        );
        assert!(errs.iter().any(|e| e.message.contains("multiple CreateMustCallFor")));
    }

    #[test]
    fn virtual_call_resolution() {
        let (m, errs) = model(
            "class Base : IDisposable { void Close() { } void Dispose() { } }
             class Derived : Base { void Close() { } }
             class Leaf : Derived { }",
        );
        assert!(errs.is_empty(), "{errs:?}");
        let targets: Vec<String> = m.resolve_call("Base", "Close", 0, true).iter().map(|&t| m.method(t).qualified_name()).collect();
        assert_eq!(targets, vec!["Base.Close", "Derived.Close"]);
        let targets: Vec<String> = m.resolve_call("Leaf", "Close", 0, true).iter().map(|&t| m.method(t).qualified_name()).collect();
        assert_eq!(targets, vec!["Derived.Close"]);
        assert!(m.in_rtype("Leaf"));
    }

    #[test]
    fn implicit_default_constructor() {
        let (m, _) = model("class P { }");
        assert_eq!(m.constructors("P", 0).len(), 1);
        assert!(m.constructors("P", 1).is_empty());
    }

    #[test]
    fn collections_are_instantiated() {
        let (m, errs) = model("class H { List<Socket> xs; List<int> ns; }");
        assert!(errs.is_empty(), "{errs:?}");
        assert!(m.in_rtype("List<Socket>"));
        assert!(!m.in_rtype("List<int>"));
        assert!(m.lookup_method("List<Socket>", "Add", 1).is_some());
    }
}
