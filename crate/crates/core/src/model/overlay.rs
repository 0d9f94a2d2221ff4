//! Binding of externally supplied attributes to program elements.

use std::fmt;
use std::str::FromStr;

use super::{attribute_reference_errors, compute_rtype, ElementRef, ModelError, ModelErrorKind, Origin, Provenance, SemanticModel};
use crate::frontend::{AttrKind, AttributeSpec, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementKind {
    Parameter,
    ReturnType,
    Field,
    Method,
    Type,
}

impl ElementKind {
    pub const ALL: [ElementKind; 5] =
        [ElementKind::Parameter, ElementKind::ReturnType, ElementKind::Field, ElementKind::Method, ElementKind::Type];

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Parameter => "Parameter",
            ElementKind::ReturnType => "ReturnType",
            ElementKind::Field => "Field",
            ElementKind::Method => "Method",
            ElementKind::Type => "Type",
        }
    }

    /// Attribute kinds that may be attached to this element kind.
    pub fn accepts(self, kind: AttrKind) -> bool {
        match self {
            ElementKind::Parameter | ElementKind::ReturnType => matches!(kind, AttrKind::Owning | AttrKind::MustCallAlias),
            ElementKind::Field => kind == AttrKind::Owning,
            ElementKind::Method => matches!(kind, AttrKind::EnsuresCalledMethods | AttrKind::CreateMustCallFor),
            ElementKind::Type => kind == AttrKind::MustCall,
        }
    }
}

impl fmt::Display for ElementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        ElementKind::ALL.into_iter().find(|k| k.name() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlayEntry {
    pub file_name: String,
    pub line_no: u32,
    pub element_type: ElementKind,
    pub element_name: String,
    pub annotation: AttrKind,
    pub args: Vec<String>,
    /// Line of the entry inside the overlay file.
    pub source_line: u32,
}

impl fmt::Display for OverlayEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fileName=\"{}\" and lineNo=\"{}\" and elementType=\"{}\" and elementName=\"{}\" and annotation=\"{}\"",
            self.file_name, self.line_no, self.element_type, self.element_name, self.annotation
        )?;
        if !self.args.is_empty() {
            write!(f, " and args=\"{}\"", self.args.join(","))?;
        }
        Ok(())
    }
}

/// Overlay file names may be given relative to any directory: they match
/// when one path is a `/`-aligned suffix of the other.
pub fn same_file(model_path: &str, overlay_path: &str) -> bool {
    let a = model_path.replace('\\', "/");
    let b = overlay_path.replace('\\', "/");
    a == b || a.ends_with(&format!("/{b}")) || b.ends_with(&format!("/{a}"))
}

fn find_element(model: &SemanticModel, e: &OverlayEntry) -> Option<ElementRef> {
    let at = |file: &str, span: Span| same_file(file, &e.file_name) && span.line == e.line_no;
    match e.element_type {
        ElementKind::Type => {
            model.user_types().find(|t| t.name == e.element_name && at(&t.file, t.span)).map(|t| ElementRef::Type(t.name.clone()))
        }
        ElementKind::Field => model.user_types().find_map(|t| {
            t.fields
                .iter()
                .find(|f| f.name == e.element_name && at(&t.file, f.span))
                .map(|f| ElementRef::Field { owner: t.name.clone(), name: f.name.clone() })
        }),
        ElementKind::Method | ElementKind::ReturnType => model
            .methods
            .iter()
            .filter(|m| !m.builtin)
            .find(|m| m.name == e.element_name && at(&m.file, m.span))
            .filter(|m| e.element_type == ElementKind::Method || !m.is_ctor || e.annotation == AttrKind::MustCallAlias)
            .map(|m| if e.element_type == ElementKind::Method { ElementRef::Method(m.id) } else { ElementRef::Return(m.id) }),
        ElementKind::Parameter => model.methods.iter().filter(|m| !m.builtin).find_map(|m| {
            m.params
                .iter()
                .position(|p| p.name == e.element_name && at(&m.file, p.span))
                .map(|i| ElementRef::Param(m.id, i))
        }),
    }
}

/// Returns a copy of `model` with every bindable entry attached. Entries that
/// match no element, or that break attribute placement rules, are reported.
pub fn apply_overlay(model: &SemanticModel, entries: &[OverlayEntry]) -> (SemanticModel, Vec<ModelError>) {
    let mut out = model.clone();
    let mut errors = Vec::new();
    let fail = |e: &OverlayEntry, why: &str| {
        ModelError::new(ModelErrorKind::OverlayBinding, &e.file_name, Span::new(e.line_no, 0), format!("{why}: {e}"))
    };
    for e in entries {
        if !e.element_type.accepts(e.annotation) {
            errors.push(fail(e, &format!("{} cannot be attached to a {}", e.annotation, e.element_type)));
            continue;
        }
        if e.args.len() != e.annotation.arity() {
            errors.push(fail(e, &format!("{} takes {} argument(s)", e.annotation, e.annotation.arity())));
            continue;
        }
        let Some(element) = find_element(&out, e) else {
            errors.push(fail(e, "overlay entry matches no program element"));
            continue;
        };
        let attr = AttributeSpec::new(e.annotation, e.args.clone(), Span::new(e.line_no, 0));
        let slot = out.attrs_mut(&element).expect("element exists");
        if slot.iter().any(|a| a.kind == attr.kind) {
            errors.push(fail(e, &format!("element already carries {}", attr.kind)));
            continue;
        }
        slot.push(attr.clone());
        out.provenance.push(Provenance { element, attr, origin: Origin::Overlay });
    }
    let before: Vec<ModelError> = attribute_reference_errors(model);
    errors.extend(attribute_reference_errors(&out).into_iter().filter(|e| !before.contains(e)));
    out.rtype = compute_rtype(&out);
    (out, errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;
    use crate::model::build_model;

    const SIMPLE: &str = "class SimpleEg {
    void closeSocket(Socket s) {
        s.Close();
    }
}
";

    fn entry(line: u32, kind: ElementKind, name: &str, attr: AttrKind) -> OverlayEntry {
        OverlayEntry {
            file_name: "SimpleEg.moo".into(),
            line_no: line,
            element_type: kind,
            element_name: name.into(),
            annotation: attr,
            args: vec![],
            source_line: 1,
        }
    }

    fn model() -> SemanticModel {
        let (m, errs) = build_model(&[parse_source("corpus/SimpleEg.moo", SIMPLE).unwrap()]);
        assert!(errs.is_empty());
        m
    }

    #[test]
    fn parameter_gains_owning() {
        let m = model();
        let (o, errs) = apply_overlay(&m, &[entry(2, ElementKind::Parameter, "s", AttrKind::Owning)]);
        assert!(errs.is_empty(), "{errs:?}");
        let close = o.lookup_method("SimpleEg", "closeSocket", 1).unwrap();
        assert!(o.method(close).param_has(0, AttrKind::Owning));
        assert_eq!(o.provenance.last().unwrap().origin, Origin::Overlay);
        assert_eq!(o.attribute_counts()[&AttrKind::Owning], 1);
    }

    #[test]
    fn empty_overlay_is_identity() {
        let m = model();
        let (o, errs) = apply_overlay(&m, &[]);
        assert!(errs.is_empty());
        assert_eq!(o, m);
    }

    #[test]
    fn unmatched_entry_is_a_binding_error() {
        let m = model();
        let (o, errs) = apply_overlay(&m, &[entry(3, ElementKind::Parameter, "s", AttrKind::Owning)]);
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].kind, ModelErrorKind::OverlayBinding);
        assert!(errs[0].message.contains("elementName=\"s\""));
        assert_eq!(o, m);
    }

    #[test]
    fn placement_rules_apply() {
        let m = model();
        let (_, errs) = apply_overlay(&m, &[entry(1, ElementKind::Type, "SimpleEg", AttrKind::Owning)]);
        assert_eq!(errs.len(), 1);
    }

    #[test]
    fn path_suffix_matching() {
        assert!(same_file("corpus/RLCTests/SimpleEg.moo", "RLCTests/SimpleEg.moo"));
        assert!(same_file("SimpleEg.moo", "/abs/SimpleEg.moo"));
        assert!(!same_file("corpus/XSimpleEg.moo", "SimpleEg.moo"));
    }
}
