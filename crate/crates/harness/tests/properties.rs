use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mustcall_core::diagnostics::analyze;
use mustcall_core::frontend::SourceUnit;
use mustcall_core::leakcheck::CheckMode;
use mustcall_harness::corpus::run_case;
use mustcall_harness::generate::{differential, generate_program, generate_random_programs, Features, GEN_FILE};
use mustcall_harness::transform::{desugar_using_text, sink_deletions, sink_lines};

fn count(text: &str) -> usize {
    analyze(&[SourceUnit::new(GEN_FILE, text)], &[], CheckMode::Full, false).unwrap().reports.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn checker_agrees_with_oracle(seed in any::<u64>()) {
        for g in generate_random_programs(seed, 2) {
            let d = differential(&g.case).unwrap();
            prop_assert!(d.agrees(), "{:?}\n{}", d.disagreements, g.case.files[0].text);
            prop_assert!(run_case(&g.case).passed());
        }
    }

    // Without exceptional edges a deleted sink can only open paths.
    #[test]
    fn deleting_a_sink_never_hides_a_leak(seed in any::<u64>(), force in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let text = generate_program(&mut rng, Features::STRAIGHT, force, false).render(false);
        let base = count(&text);
        let units = [SourceUnit::new(GEN_FILE, text.clone())];
        let lines = sink_lines(&units).remove(GEN_FILE).unwrap_or_default();
        for variant in sink_deletions(&text, &lines) {
            prop_assert!(count(&variant) >= base, "{variant}");
        }
    }

    #[test]
    fn using_desugaring_preserves_reports(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let text = generate_program(&mut rng, Features::ALL, 2, false).render(false);
        let desugared = desugar_using_text(&text).unwrap();
        let a = analyze(&[SourceUnit::new(GEN_FILE, text)], &[], CheckMode::Full, false).unwrap();
        let b = analyze(&[SourceUnit::new(GEN_FILE, desugared)], &[], CheckMode::Full, false).unwrap();
        prop_assert_eq!(a.reports, b.reports);
    }

    #[test]
    fn naive_reports_are_allocation_lines(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let text = generate_program(&mut rng, Features::ALL, 0, false).render(false);
        let naive = analyze(&[SourceUnit::new(GEN_FILE, text.clone())], &[], CheckMode::Naive, false).unwrap();
        for r in naive.reports {
            let line = text.lines().nth(r.line as usize - 1).unwrap();
            prop_assert!(line.contains("new Socket()"), "{line}");
        }
    }
}
