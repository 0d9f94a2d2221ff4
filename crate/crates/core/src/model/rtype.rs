use std::collections::BTreeSet;

use super::SemanticModel;
use crate::frontend::AttrKind;

/// Applies the membership rules once to `current`, returning `current`
/// extended with every newly derived type.
pub fn rtype_step(model: &SemanticModel, current: &BTreeSet<String>) -> BTreeSet<String> {
    let mut next = current.clone();
    for t in model.types.values() {
        let member = t.implements_disposable
            || t.fields.iter().any(|f| f.is_owning())
            || t.attributes.iter().any(|a| a.kind == AttrKind::MustCall)
            || t.is_collection_of.as_ref().is_some_and(|e| current.contains(e))
            || t.declared_supertype.as_ref().is_some_and(|s| current.contains(s));
        if member {
            next.insert(t.name.clone());
        }
    }
    next
}

/// Least set of resource types closed under the membership rules.
pub fn compute_rtype(model: &SemanticModel) -> BTreeSet<String> {
    let mut set = BTreeSet::new();
    loop {
        let next = rtype_step(model, &set);
        if next == set {
            return set;
        }
        set = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;
    use crate::model::build_model;

    fn rtype(src: &str) -> BTreeSet<String> {
        let (m, errs) = build_model(&[parse_source("t.moo", src).unwrap()]);
        assert!(errs.is_empty(), "{errs:?}");
        m.rtype.into_iter().filter(|t| !m.types[t].builtin || t.starts_with("List<")).collect()
    }

    #[test]
    fn disposable_class() {
        assert!(rtype("class Container : IDisposable { void Dispose() { } }").contains("Container"));
    }

    #[test]
    fn plain_class_is_not_a_resource() {
        assert!(rtype("class P { int x; }").is_empty());
    }

    #[test]
    fn recursive_rules_reach_fixpoint() {
        let set = rtype(
            "class Holder { [Owning] Socket s; }
             class Outer { [Owning] Holder h; }
             class Sub : Outer { }
             class Bag { List<Holder> items; }",
        );
        let want: BTreeSet<String> = ["Holder", "Outer", "Sub", "List<Holder>"].into_iter().map(String::from).collect();
        assert_eq!(set, want);
    }

    #[test]
    fn must_call_attribute() {
        assert!(rtype("[MustCall(Release)] class R { void Release() { } }").contains("R"));
    }
}
