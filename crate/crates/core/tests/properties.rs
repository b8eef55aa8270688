mod support;

use discretep::downstream::{bh_step_up, bh_threshold, fisher_statistic};
use discretep::orders::check_usual_order;
use discretep::orders::{pvalue_cdf, randomized_pvalue_cdf_at, verify_all_claims, SuiteConfig, UpperBound};
use discretep::ranking::verify_agreement;
use discretep::rational::{one, ratio, zero};
use discretep::testing::{breakpoint_grid, pvalue_family, size_alpha_test, uniform_grid};
use discretep::{Basis, Claim, DiscreteModel, FamilyKind, Ranking, Rational, Statistic, TieBreak, Verdict};
use proptest::prelude::*;
use support::oracle;

fn setup(seed: u64, sufficient: bool) -> (DiscreteModel, Statistic) {
    let model = oracle::random_model(seed, 40, sufficient);
    let stat = Statistic::from_model(&model, "t").unwrap();
    (model, stat)
}

fn policies(seed: u64) -> [TieBreak; 2] {
    [TieBreak::Lexicographic, TieBreak::SeededShuffle(seed)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn pmfs_normalize_and_complements_sum_to_one(seed in any::<u64>(), cut in 0u64..8) {
        let (model, stat) = setup(seed, seed % 2 == 0);
        for p in model.parameters() {
            let total = model.probs(&p.name).unwrap().iter().fold(zero(), |acc, q| acc + q);
            prop_assert_eq!(total, one());
            let c = Rational::from_integer((cut as i64).into());
            let above = model.event_prob(&p.name, |pt| pt.statistic("t").unwrap() > &c).unwrap();
            let below = model.event_prob(&p.name, |pt| pt.statistic("t").unwrap() <= &c).unwrap();
            prop_assert_eq!(above + below, one());
        }
        prop_assert_eq!(stat.len(), model.len());
    }

    #[test]
    fn bernoulli_pmf_depends_only_on_sum(n in 1u32..8, num in 1i64..9) {
        let model = DiscreteModel::bernoulli_product(n, &[ratio(1, 2), ratio(num, 10)]).unwrap();
        let sum = Statistic::from_model(&model, "sum").unwrap();
        for class in sum.tie_classes() {
            for p in model.parameters() {
                let probs = model.probs(&p.name).unwrap();
                prop_assert!(class.iter().all(|&x| probs[x] == probs[class[0]]));
            }
        }
    }

    #[test]
    fn built_rankings_agree_and_are_bijections(seed in any::<u64>()) {
        let (model, stat) = setup(seed, false);
        for policy in policies(seed) {
            let r = Ranking::build(&model, &stat, &policy).unwrap();
            prop_assert!(verify_agreement(&stat, &r).unwrap().agrees);
            let mut ranks = r.ranks().to_vec();
            ranks.sort();
            prop_assert_eq!(ranks, (1..=model.len()).collect::<Vec<_>>());
        }
        let a = Ranking::build(&model, &stat, &TieBreak::Lexicographic).unwrap();
        let b = Ranking::build(&model, &stat, &TieBreak::Lexicographic).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn size_identity_level_and_monotonicity(seed in any::<u64>()) {
        let (model, stat) = setup(seed, false);
        let ranking = Ranking::build(&model, &stat, &TieBreak::SeededShuffle(seed)).unwrap();
        let t = pvalue_family(&model, Basis::Statistic(&stat)).unwrap();
        let md = pvalue_family(&model, Basis::Ranking(&ranking)).unwrap();
        let mut alphas = breakpoint_grid(&[&t, &md], true);
        alphas.extend(uniform_grid(101));
        alphas.sort();
        alphas.dedup();
        let null = model.null_name().to_string();
        for basis in [Basis::Statistic(&stat), Basis::Ranking(&ranking)] {
            let mut prev: Option<Vec<Rational>> = None;
            for alpha in &alphas {
                let test = size_alpha_test(&model, basis, alpha).unwrap();
                prop_assert_eq!(&test.power(&model, &null).unwrap(), alpha);
                prop_assert!(&test.natural_power(&model, &null).unwrap() <= alpha);
                if let Some(p) = &prev {
                    prop_assert!(p.iter().zip(test.values()).all(|(a, b)| a <= b));
                }
                prev = Some(test.values().to_vec());
            }
        }
    }

    #[test]
    fn pvalue_decision_coherence(seed in any::<u64>()) {
        let (model, stat) = setup(seed, false);
        let ranking = Ranking::build(&model, &stat, &TieBreak::Lexicographic).unwrap();
        for basis in [Basis::Statistic(&stat), Basis::Ranking(&ranking)] {
            let fam = pvalue_family(&model, basis).unwrap();
            for alpha in fam.breakpoints() {
                let test = size_alpha_test(&model, basis, &alpha).unwrap();
                for u in [ratio(1, 4), ratio(1, 2), ratio(3, 4), one()] {
                    for x in 0..model.len() {
                        let by_p = fam.value(x, &u) <= alpha;
                        let by_phi = test.decision(x, &u).unwrap() == discretep::testing::Decision::Reject;
                        prop_assert_eq!(by_p, by_phi);
                    }
                }
            }
        }
    }

    #[test]
    fn md_attains_every_cumulative_value(seed in any::<u64>()) {
        let (model, stat) = setup(seed, false);
        let ranking = Ranking::build(&model, &stat, &TieBreak::Lexicographic).unwrap();
        let md = pvalue_family(&model, Basis::Ranking(&ranking)).unwrap();
        let mut attained: Vec<Rational> = (0..model.len()).map(|x| md.natural(x)).collect();
        attained.sort();
        let p0 = model.null_probs();
        let mut acc = zero();
        let expected: Vec<Rational> = ranking.order().iter().map(|&x| { acc += &p0[x]; acc.clone() }).collect();
        prop_assert_eq!(attained, expected);
        prop_assert_eq!(md.kind(), FamilyKind::MinimallyDiscrete);
    }

    #[test]
    fn randomized_cdf_is_uniform_and_natural_sandwiched(seed in any::<u64>()) {
        let (model, stat) = setup(seed, false);
        let ranking = Ranking::build(&model, &stat, &TieBreak::Lexicographic).unwrap();
        let t = pvalue_family(&model, Basis::Statistic(&stat)).unwrap();
        let md = pvalue_family(&model, Basis::Ranking(&ranking)).unwrap();
        let null = model.null_name().to_string();
        for fam in [&t, &md] {
            for x in uniform_grid(64) {
                prop_assert_eq!(randomized_pvalue_cdf_at(&model, &null, fam, &x).unwrap(), x);
            }
        }
        let ft = pvalue_cdf(&model, &null, &t, &one()).unwrap();
        let fmd = pvalue_cdf(&model, &null, &md, &one()).unwrap();
        prop_assert!(check_usual_order(Claim::C4, &ft, UpperBound::Cdf(&fmd)).passed());
        prop_assert!(check_usual_order(Claim::C4, &fmd, UpperBound::Diagonal).passed());
    }

    #[test]
    fn suite_never_fails_and_sufficiency_enables_c6(seed in any::<u64>()) {
        let sufficient = seed % 2 == 0;
        let (model, stat) = setup(seed, sufficient);
        let ranking = Ranking::build(&model, &stat, &TieBreak::SeededShuffle(seed)).unwrap();
        let grid: Vec<&str> = model.parameters()[1..].iter().map(|p| p.name.as_str()).collect();
        let config = SuiteConfig { uniform_points: 50, ..SuiteConfig::default() };
        let reports = verify_all_claims(&model, &stat, &ranking, &grid, &config).unwrap();
        prop_assert!(reports.iter().all(|r| r.verdict != Verdict::Fail));
        if sufficient {
            prop_assert_eq!(reports[5].verdict, Verdict::Pass);
            prop_assert_eq!(reports[7].verdict, Verdict::Pass);
        }
    }

    #[test]
    fn bh_forms_agree_and_nest(p in prop::collection::vec(0.0f64..=1.0, 0..60), a in 0.0f64..0.5, d in 0.0f64..0.5) {
        let lo = bh_threshold(&p, a).unwrap();
        prop_assert_eq!(&lo, &bh_step_up(&p, a).unwrap());
        let hi = bh_threshold(&p, a + d).unwrap();
        prop_assert!(lo.rejected.iter().all(|i| hi.rejected.contains(i)));
    }

    #[test]
    fn bh_forms_agree_with_ties(k in prop::collection::vec(0u32..=32, 0..60)) {
        let p: Vec<f64> = k.iter().map(|&k| k as f64 / 32.0).collect();
        for a in [0.05, 0.1, 0.2] {
            prop_assert_eq!(bh_threshold(&p, a).unwrap(), bh_step_up(&p, a).unwrap());
        }
    }

    #[test]
    fn fisher_statistic_adds(a in prop::collection::vec(1e-6f64..=1.0, 1..20), b in prop::collection::vec(1e-6f64..=1.0, 1..20)) {
        let joined: Vec<f64> = a.iter().chain(&b).copied().collect();
        let lhs = fisher_statistic(&joined).unwrap();
        let rhs = fisher_statistic(&a).unwrap() + fisher_statistic(&b).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * lhs.max(1.0));
    }
}
