//! p-value families in multiple testing and meta-analysis.

pub mod chi2;
pub mod procedures;
pub mod simulation;

pub use chi2::{chi2_survival, chi2_upper_quantile};
pub use procedures::{
    bh_step_up, bh_threshold, bonferroni, evalue_calibrate, fisher_statistic, fisher_test, geometric_mean_combination,
    Calibrator, EValue, FisherResult, GeometricMean, Rejections,
};
pub use simulation::{
    resolve_model, simulate, write_summary_csv, Procedure, ReplicateOutcome, Simulation, SimulationConfig,
    SimulationReport, UPolicy,
};

use crate::error::Result;
use crate::model::DiscreteModel;
use crate::rational::{zero, Rational};
use crate::testing::TestFunction;

/// `Pr_θ{0 < φ(X) < 1}`: how often the decision hinges on the auxiliary draw.
pub fn randomization_dependence_prob(model: &DiscreteModel, param: &str, test: &TestFunction) -> Result<Rational> {
    let probs = model.probs(param)?;
    Ok(test.randomized_points().fold(zero(), |acc, x| acc + &probs[x]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::example1_priority;
    use crate::ranking::{Ranking, Statistic, TieBreak};
    use crate::rational::{int, ratio};
    use crate::testing::{size_alpha_test, Basis};

    #[test]
    fn md_dependence_is_five_times_smaller() {
        let m = DiscreteModel::example1();
        let lr = Statistic::likelihood_ratio(&m, "theta0", "theta1").unwrap();
        let r = Ranking::build(&m, &lr, &TieBreak::Priority(example1_priority())).unwrap();
        let a = ratio(1, 20);
        let t = size_alpha_test(&m, Basis::Statistic(&lr), &a).unwrap();
        let md = size_alpha_test(&m, Basis::Ranking(&r), &a).unwrap();
        assert_eq!(t.gamma(), &ratio(3, 25));
        assert_eq!(md.gamma(), &ratio(3, 5));
        let pt = randomization_dependence_prob(&m, "theta0", &t).unwrap();
        let pmd = randomization_dependence_prob(&m, "theta0", &md).unwrap();
        assert_eq!(pt, ratio(5, 32));
        assert_eq!(pmd, ratio(1, 32));
        assert_eq!(pt / pmd, int(5));
        let t0 = size_alpha_test(&m, Basis::Statistic(&lr), &zero()).unwrap();
        assert_eq!(randomization_dependence_prob(&m, "theta0", &t0).unwrap(), zero());
    }
}
