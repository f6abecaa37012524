//! The scenario registry. Each scenario maps a [`RunConfig`] to tables and
//! named checks; a failed check makes the run fail.

mod estimates;
mod paths;
mod stochastic;

use crate::config::RunConfig;
use crate::output::Outcome;

type Runner = fn(&RunConfig, &mut Outcome) -> logdrift::Result<()>;

pub struct Scenario {
    pub name: &'static str,
    pub description: &'static str,
    /// The statement of the theory that the scenario exercises.
    pub anchor: &'static str,
    /// Overrides of the global defaults, applied before the config file.
    pub defaults: &'static [(&'static str, &'static str)],
    run: Runner,
}

impl Scenario {
    pub fn run(&self, cfg: &RunConfig, out: &mut Outcome) -> logdrift::Result<()> {
        (self.run)(cfg, out)
    }
}

/// All scenarios, sorted by name.
pub fn registry() -> Vec<Scenario> {
    let mut v = vec![
        Scenario {
            name: "blowup-phase",
            description: "ensemble blow-up fraction, compared with the Osgood classification of the drift",
            anchor: "Osgood blow-up regime vs non-explosion under critical growth",
            defaults: &[
                ("drift.family", "log_power"),
                ("drift.exponent", "2"),
                ("diffusion.family", "bounded"),
                ("diffusion.d1", "0"),
                ("diffusion.d2", "1"),
                ("u0", "mode:1,50"),
                ("grid.horizon", "4"),
                ("grid.n_steps", "2048"),
            ],
            run: paths::blowup_phase,
        },
        Scenario {
            name: "factorization",
            description: "direct stochastic convolution vs its two-stage factorized form under dt halving",
            anchor: "factorization identity for the stochastic convolution",
            defaults: &[("grid.n_steps", "64"), ("diffusion.d1", "0"), ("diffusion.d2", "1")],
            run: stochastic::factorization,
        },
        Scenario {
            name: "gronwall-suite",
            description: "randomized domination of the three Gronwall-type bounds, oracle grid stability, zero uniqueness",
            anchor: "log-gronwall, reduced and double-exponential bounds; zero-uniqueness",
            defaults: &[],
            run: estimates::gronwall_suite,
        },
        Scenario {
            name: "hypothesis-check",
            description: "growth and continuity hypotheses of the configured coefficients and their mollifications",
            anchor: "coefficient growth and continuity hypotheses; mollified-drift uniform growth",
            defaults: &[],
            run: estimates::hypothesis_check,
        },
        Scenario {
            name: "isometry",
            description: "Monte Carlo Ito isometry along a smoothed heat-kernel integrand sequence",
            anchor: "Ito-isometry convergence of stochastic integrals",
            defaults: &[("grid.n_steps", "64")],
            run: stochastic::isometry,
        },
        Scenario {
            name: "kernel-estimates",
            description: "Dirichlet heat kernel forms, time-increment and spatial-modulus rates, log-Jensen bound",
            anchor: "heat-kernel time-increment and spatial-modulus estimates; log-Jensen kernel bound",
            defaults: &[],
            run: estimates::kernel_estimates,
        },
        Scenario {
            name: "moments",
            description: "sup-moment ensembles, convolution scaling skeleton, epsilon splitting, level uniformity",
            anchor: "a-priori moment bound; convolution moment bounds; uniform estimate over mollifications",
            defaults: &[],
            run: stochastic::moments,
        },
        Scenario {
            name: "uniqueness",
            description: "mollified-drift solutions on common noise converge as the level grows",
            anchor: "pathwise uniqueness under log-Lipschitz drift",
            defaults: &[("grid.n_steps", "256")],
            run: paths::uniqueness,
        },
    ];
    v.sort_by_key(|s| s.name);
    v
}

pub fn find(name: &str) -> Option<Scenario> {
    registry().into_iter().find(|s| s.name == name)
}

/// The `--list` text: `name<TAB>description<TAB>anchor`, sorted.
pub fn listing() -> String {
    registry().iter().map(|s| format!("{}\t{}\t[{}]\n", s.name, s.description, s.anchor)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_sorted_scenarios_with_valid_overlays() {
        let r = registry();
        assert_eq!(r.len(), 8);
        assert!(r.windows(2).all(|w| w[0].name < w[1].name));
        for s in &r {
            assert!(!s.anchor.is_empty() && !s.description.is_empty());
            let mut c = RunConfig::default();
            for (k, v) in s.defaults {
                c.set(k, v).unwrap();
            }
        }
    }
}
