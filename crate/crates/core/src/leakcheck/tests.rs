use super::*;
use crate::frontend::parse_source;
use crate::model::build_model;

fn model(src: &str) -> SemanticModel {
    let (model, errs) = build_model(&[parse_source("t.moo", src).unwrap()]);
    assert!(errs.is_empty(), "{errs:?}");
    model
}

fn verdicts(src: &str, mode: CheckMode) -> Vec<(u32, ReportKind)> {
    check_program(&model(src), mode).0.iter().map(|r| (r.line, r.kind)).collect()
}

fn full(src: &str) -> Vec<(u32, ReportKind)> {
    verdicts(src, CheckMode::Full)
}

fn naive(src: &str) -> Vec<(u32, ReportKind)> {
    verdicts(src, CheckMode::Naive)
}

fn analysis<'m>(model: &'m SemanticModel, name: &str) -> MethodAnalysis<'m> {
    let id = model.user_methods().find(|m| m.name == name).unwrap().id;
    MethodAnalysis::new(model, id, CheckMode::Full).unwrap()
}

const FIG1: &str = "class A { void m(bool c) {
    Socket a = new Socket();
    if (c) { int x = 1; } else { a.Close(); }
} }";

const EX22: &str = "[MustCall(Dispose)]
class Container : IDisposable {
    public void Dispose() { }
    public static void Main() {
        Container c = new Container();
        c.Dispose();
    }
}";

const EX23: &str = "class P {
    [Owning]
    Socket createSocket() {
        return new Socket();
    }
    void perform() {
        Socket so = createSocket();
        closeSocket(so);
    }
    void closeSocket([Owning] Socket s) {
        s.Dispose();
    }
}";

const EX24: &str = "[MustCall(Dispose)]
class Container : IDisposable {
    [Owning]
    Socket socket;
    public Container() {
        socket = new Socket();
    }
    [EnsuresCalledMethods(socket, Dispose)]
    public void Dispose() {
        socket.Dispose();
    }
    public static void Main() {
        Container c = new Container();
        c.Dispose();
    }
}";

const EX25: &str = "[MustCall(Dispose)]
class Container : IDisposable {
    [Owning]
    Socket socket;
    public Container() {
        socket = new Socket();
    }
    [EnsuresCalledMethods(socket, Dispose)]
    public void Dispose() {
        socket.Dispose();
    }
    public static void Main() {
        Container c = new Container();
        c.reset();
        c.Dispose();
    }
    [CreateMustCallFor(socket)]
    public void reset() {
        if (socket != null)
            socket.Dispose();
        socket = new Socket();
    }
}";

#[test]
fn fig1_reports_one_leak_at_allocation() {
    assert_eq!(full(FIG1), vec![(2, ReportKind::ObjectCreation)]);
    assert_eq!(naive(FIG1), vec![(2, ReportKind::ObjectCreation)]);
}

#[test]
fn fig1_report_text_and_witness() {
    let m = model(FIG1);
    let (reports, _) = check_program(&m, CheckMode::Full);
    let r = &reports[0];
    assert_eq!(r.message, "resource of type Socket may not be released on all paths");
    assert_eq!(r.scope, "A.m");
    let a = analysis(&m, "m");
    let w: Vec<NodeId> = r.witness.as_ref().unwrap().iter().map(|&n| NodeId(n)).collect();
    assert_eq!(w[0], a.sources[0].at);
    assert_eq!(*w.last().unwrap(), a.cfg.exit);
    let b = a.blockers(&a.sources[0]);
    for pair in w.windows(2) {
        assert!(a.cfg.successors(pair[0]).contains(&pair[1]));
        assert!(!b.nodes.contains(&pair[1]));
    }
}

#[test]
fn direct_dispose_is_clean_in_both_modes() {
    assert!(full(EX22).is_empty());
    assert!(naive(EX22).is_empty());
}

#[test]
fn owning_transfer_is_clean_but_naive_reports() {
    assert!(full(EX23).is_empty());
    assert!(!naive(EX23).is_empty());
}

#[test]
fn example_2_3_sources_and_sinks() {
    let m = model(EX23);
    let perform = analysis(&m, "perform");
    let kinds: Vec<SourceKind> = perform.sources.iter().map(|s| s.kind).collect();
    assert_eq!(kinds, vec![SourceKind::OwningReturnCall]);
    assert!(perform.sinks.iter().any(|s| s.kind == SinkKind::OwningArgumentCall));
    let create = analysis(&m, "createSocket");
    assert!(create.sinks.iter().any(|s| s.kind == SinkKind::OwningReturnExpr));
    let close = analysis(&m, "closeSocket");
    assert_eq!(close.sources[0].kind, SourceKind::OwningParameter);
}

#[test]
fn owning_field_is_clean_but_naive_reports() {
    assert!(full(EX24).is_empty());
    assert!(!naive(EX24).is_empty());
}

#[test]
fn ensures_called_methods_call_is_a_sink() {
    let m = model(EX24);
    let main = analysis(&m, "Main");
    assert!(main
        .sinks
        .iter()
        .any(|s| s.kind == SinkKind::EnsuresCalledMethodsCall && s.field.as_deref() == Some("socket")));
}

#[test]
fn create_must_call_for_example_is_clean() {
    assert!(full(EX25).is_empty());
    let m = model(EX25);
    let kinds: Vec<SourceKind> = analysis(&m, "Main").sources.iter().map(|s| s.kind).collect();
    assert_eq!(kinds, vec![SourceKind::ObjectCreation, SourceKind::CreateMustCallForCall]);
}

#[test]
fn reset_without_release_is_a_field_overwrite() {
    let src = EX25.replace("if (socket != null)\n            socket.Dispose();\n", "");
    assert_eq!(full(&src), vec![(19, ReportKind::FieldOverwrite)]);
    // the naive baseline does not see the mutation
    let kinds = |v: Vec<(u32, ReportKind)>| v.into_iter().map(|(_, k)| k).collect::<Vec<_>>();
    assert_eq!(kinds(naive(&src)), kinds(naive(EX25)));
}

#[test]
fn create_must_call_for_without_assignment_is_vacuous() {
    let src = EX25.replace("        socket = new Socket();\n    }\n}", "    }\n}");
    assert!(full(&src).iter().all(|(_, k)| *k != ReportKind::FieldOverwrite));
}

#[test]
fn create_must_call_for_obligation_needs_ensures_call() {
    // Close is a plain release of the container, not of its field
    let src = EX25.replace("c.Dispose();\n    }\n    [Create", "c.Close();\n    }\n    public void Close() { }\n    [Create");
    let got = full(&src);
    assert!(got.contains(&(14, ReportKind::CreateMustCallForCall)), "{got:?}");
    assert!(!got.contains(&(13, ReportKind::ObjectCreation)), "{got:?}");
}

#[test]
fn owning_field_without_release_in_dispose_is_reported() {
    let src = EX24.replace("        socket.Dispose();\n", "");
    assert_eq!(full(&src), vec![(4, ReportKind::OwningField)]);
}

#[test]
fn owning_field_without_must_call_is_reported() {
    let src = "class Holder {
        [Owning] Socket s;
        public Holder() { s = new Socket(); }
    }";
    let m = model(src);
    let (reports, _) = check_program(&m, CheckMode::Full);
    assert_eq!(reports.len(), 1, "{reports:?}");
    assert!(reports.iter().any(|r| r.kind == ReportKind::OwningField && r.message.contains("no must-call method")));
}

#[test]
fn owning_field_guarded_release_counts() {
    let src = EX24.replace("socket.Dispose();\n    }\n    public static", "if (socket != null) { socket.Dispose(); }\n    }\n    public static");
    assert!(full(&src).is_empty());
}

#[test]
fn must_call_alias_method_and_constructor_are_clean() {
    let ex26 = "class Ex {
        [MustCallAlias]
        Socket createAlias([MustCallAlias] Socket s) { Socket new_s = s; return new_s; }
        void m() {
            Socket sock = new Socket();
            Socket new_sock = createAlias(sock);
            new_sock.Dispose();
        }
    }";
    assert!(full(ex26).is_empty());
    assert!(!naive(ex26).is_empty());
    let ex27 = "[MustCall(Dispose)]
    class SWrapper : IDisposable {
        [Owning] Socket socket;
        [MustCallAlias]
        public SWrapper([MustCallAlias] Socket s) { this.socket = s; }
        [EnsuresCalledMethods(socket, Dispose)]
        public void Dispose() { socket.Dispose(); }
        public static void Main() {
            Socket sock = new Socket();
            SWrapper wrap_sock = new SWrapper(sock);
            wrap_sock.Dispose();
        }
    }";
    assert!(full(ex27).is_empty());
    assert!(!naive(ex27).is_empty());
}

const EX31: &str = "class E { void m() {
    try {
        Socket s = new Socket();
        s.Connect(\"h\");
        s.Dispose();
    }
    catch (Exception e) { }
} }";

#[test]
fn exceptional_path_leaks() {
    assert_eq!(full(EX31), vec![(3, ReportKind::ObjectCreation)]);
}

#[test]
fn dispose_in_catch_fixes_exceptional_leak() {
    let src = "class E { void m() {
        Socket s = null;
        try {
            s = new Socket();
            s.Connect(\"h\");
            s.Dispose();
        }
        catch (Exception e) { s.Dispose(); }
    } }";
    assert!(full(src).is_empty());
}

#[test]
fn unmanaged_exception_is_not_reported() {
    let src = "class E { void m(int x, int y) {
        var s = new Socket();
        int z = x / y;
        s.Dispose();
    } }";
    assert!(full(src).is_empty());
}

#[test]
fn null_guard_discharges_on_false_edge() {
    let src = "class N {
        [Owning] Socket mayOpen() { return new Socket(); }
        void m() {
            var r = mayOpen();
            if (r != null) r.Dispose();
        }
    }";
    assert!(full(src).is_empty());
    let m = model(src);
    let a = analysis(&m, "m");
    let nulls: Vec<&SinkDischarge> = a.sinks.iter().filter(|s| s.kind == SinkKind::NullDischarge).collect();
    assert_eq!(nulls.len(), 1);
    assert_eq!(nulls[0].edge, Some(EdgeKind::False));
}

#[test]
fn null_guard_early_return() {
    let src = "class N {
        [Owning] Socket mayOpen() { return new Socket(); }
        void m() {
            var r = mayOpen();
            if (r == null) return;
            r.Dispose();
        }
    }";
    assert!(full(src).is_empty());
}

#[test]
fn guard_on_unrelated_variable_does_not_discharge() {
    let src = "class N {
        void m(Socket other) {
            var r = new Socket();
            if (other != null) r.Dispose();
        }
    }";
    assert_eq!(full(src), vec![(3, ReportKind::ObjectCreation)]);
}

#[test]
fn using_block_disposes() {
    let src = "class U { void m() {
        using (Socket s = new Socket()) { s.Connect(\"h\"); }
    } }";
    assert!(full(src).is_empty());
    assert!(naive(src).is_empty());
}

#[test]
fn loops_are_handled_by_reachability() {
    let leaking = "class L { void m(int n) {
        while (n > 0) { Socket s = new Socket(); n = n - 1; }
    } }";
    assert_eq!(full(leaking), vec![(2, ReportKind::ObjectCreation)]);
    let clean = "class L { void m(int n) {
        while (n > 0) { Socket s = new Socket(); s.Dispose(); n = n - 1; }
    } }";
    assert!(full(clean).is_empty());
}

#[test]
fn finally_copies_report_once() {
    let src = "class F { void m(bool c) {
        try { if (c) return; } finally { Socket s = new Socket(); }
    } }";
    assert_eq!(full(src), vec![(2, ReportKind::ObjectCreation)]);
}

#[test]
fn release_method_named_by_must_call_is_a_sink() {
    let src = "[MustCall(Shutdown)]
    class R { void Shutdown() { } }
    class M { void m() { R r = new R(); r.Shutdown(); } }";
    assert!(full(src).is_empty());
}

#[test]
fn no_sources_means_no_reports() {
    let m = model("class A { int m(int x) { return x + 1; } }");
    assert!(analysis(&m, "m").sources.is_empty());
}

#[test]
fn stats_count_sources_and_sinks() {
    let (_, stats) = check_program(&model(EX23), CheckMode::Full);
    assert_eq!(stats.sources[&SourceKind::OwningReturnCall], 1);
    assert_eq!(stats.sources[&SourceKind::ObjectCreation], 1);
    assert_eq!(stats.sources[&SourceKind::OwningParameter], 1);
    assert_eq!(stats.sinks[&SinkKind::OwningArgumentCall], 1);
}

#[test]
fn report_kind_round_trips() {
    for k in ReportKind::ALL {
        assert_eq!(k.name().parse::<ReportKind>().unwrap(), k);
    }
    assert!("Nope".parse::<ReportKind>().is_err());
}
