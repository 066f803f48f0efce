//! Monte Carlo properties of the convergence harness.

use volterra_sim::analysis::{
    bondesson_gamma_exponent, fit_rate, rate_study, Abscissa, FieldSpec, LevelSpec, NoiseSpec, StudyTemplate,
};
use volterra_sim::jump_fields::{bondesson_gamma_generator, DEFAULT_MAX_EVENTS};
use volterra_sim::kernel::{DomainTruncation, KernelSpec};
use volterra_sim::levy_measure::LevyMeasure;
use volterra_sim::solver::{GridSpec, InitialField, Sigma};

const GAMMA: f64 = 10.0;
const LAMBDA: f64 = 0.1;

fn template(noise: NoiseSpec) -> StudyTemplate {
    StudyTemplate {
        fields: FieldSpec {
            noise,
            trunc: DomainTruncation::new(vec![0.5], 0.5).unwrap(),
            horizon: 1.0,
            max_events: DEFAULT_MAX_EVENTS,
        },
        kernel: KernelSpec::heat(1, 1.0).unwrap(),
        sigma: Sigma::One,
        y0: InitialField::Zero,
        grid: GridSpec::uniform_1d(0.0, 1.0, 11, 0.0, 1.0, 11).unwrap(),
        kernel_floor: 0.0,
    }
}

fn bondesson_slope() -> f64 {
    let t = template(NoiseSpec::Series {
        generator: bondesson_gamma_generator(GAMMA, LAMBDA).unwrap(),
    });
    let level = |n: f64| LevelSpec::Series { n_space: 1, n_level: n };
    let levels: Vec<_> = [10.0, 20.0, 30.0, 40.0, 50.0].into_iter().map(level).collect();
    let report = rate_study(&t, &levels, &level(100.0), 200, 17, 1.0).unwrap();
    fit_rate(&report, Abscissa::LevelLinear, bondesson_gamma_exponent(1.0, 0.5, GAMMA))
        .unwrap()
        .slope
}

// The grid-sup error of the discarded Bondesson marks decays like
// e^{-N/γ}, the kept-mass tail itself.
#[test]
fn bondesson_error_decays_like_envelope() {
    let slope = bondesson_slope();
    let target = -1.0 / GAMMA;
    assert!((slope - target).abs() <= 0.3 * target.abs(), "slope {slope}");
}

#[test]
#[ignore = "observed decay is -1/γ, twice the bound exponent -(p-q)/(p*γ); kept as a record"]
fn bondesson_slope_matches_bound_exponent() {
    let slope = bondesson_slope();
    let target = bondesson_gamma_exponent(1.0, 0.5, GAMMA);
    assert!((slope - target).abs() <= 0.3 * target.abs(), "slope {slope} vs {target}");
}

#[test]
fn truncated_moments_approach_the_full_moments() {
    let measure = LevyMeasure::gamma(GAMMA, LAMBDA).unwrap();
    let trunc = DomainTruncation::new(vec![0.5], 0.5).unwrap();
    let cutoff = FieldSpec {
        noise: NoiseSpec::Truncation { measure },
        trunc: trunc.clone(),
        horizon: 1.0,
        max_events: DEFAULT_MAX_EVENTS,
    };
    let series = FieldSpec {
        noise: NoiseSpec::Series {
            generator: bondesson_gamma_generator(GAMMA, LAMBDA).unwrap(),
        },
        trunc,
        horizon: 1.0,
        max_events: DEFAULT_MAX_EVENTS,
    };
    let full = [GAMMA / LAMBDA, GAMMA / (LAMBDA * LAMBDA)];
    for k in [1u32, 2] {
        let mut last = [f64::INFINITY; 2];
        for n in [5usize, 10, 20, 40, 80] {
            let gaps = [
                (full[k as usize - 1]
                    - cutoff
                        .kept_moment(
                            k,
                            &LevelSpec::Truncation {
                                epsilon: 1.0 / n as f64,
                                domain_level: 1,
                            },
                        )
                        .unwrap())
                .abs(),
                (full[k as usize - 1]
                    - series
                        .kept_moment(
                            k,
                            &LevelSpec::Series {
                                n_space: 1,
                                n_level: n as f64,
                            },
                        )
                        .unwrap())
                .abs(),
            ];
            for s in 0..2 {
                assert!(gaps[s] < last[s], "moment {k}, scheme {s}, N = {n}: gap {} not below {}", gaps[s], last[s]);
            }
            last = gaps;
        }
        assert!(last[0] < 1e-2 * full[k as usize - 1] && last[1] < 1e-2 * full[k as usize - 1]);
    }
}

// ε_N = N^{-3} is summable in the bound exponent (k = 3 > 1/(p - q) = 2).
// Per replicate, sup_{M ≥ N} e_M must stay below C ε_N^{(p-q)/p*} for all
// N ≥ 2, with C twice the median level-1 error.
#[test]
fn summable_schedule_dominates_per_replicate_errors() {
    let t = template(NoiseSpec::Truncation {
        measure: LevyMeasure::gamma(GAMMA, LAMBDA).unwrap(),
    });
    let eps = |n: usize| (n as f64).powi(-3);
    let level = |n: usize| LevelSpec::Truncation {
        epsilon: eps(n),
        domain_level: 1,
    };
    let ns: Vec<usize> = (1..=8).collect();
    let levels: Vec<_> = ns.iter().map(|n| level(*n)).collect();
    let report = rate_study(&t, &levels, &level(9), 1000, 8, 1.0).unwrap();
    let mut first: Vec<f64> = report.samples.iter().map(|s| s[0]).collect();
    first.sort_by(f64::total_cmp);
    let c = 2.0 * first[first.len() / 2];
    let envelope = |n: usize| c * eps(n).powf(0.5);
    let dominated = report
        .samples
        .iter()
        .filter(|s| {
            (1..ns.len()).all(|j| {
                let tail_max = s[j..].iter().fold(0.0f64, |m, e| m.max(*e));
                tail_max <= envelope(ns[j])
            })
        })
        .count();
    assert!(dominated as f64 >= 0.95 * report.samples.len() as f64, "{dominated} of {}", report.samples.len());
}

#[test]
fn doubling_replicates_shrinks_se() {
    let t = template(NoiseSpec::Truncation {
        measure: LevyMeasure::gamma(GAMMA, LAMBDA).unwrap(),
    });
    let level = |e: f64| LevelSpec::Truncation {
        epsilon: e,
        domain_level: 1,
    };
    let levels = [level(0.2), level(0.1)];
    let a = rate_study(&t, &levels, &level(0.025), 400, 5, 1.0).unwrap();
    let b = rate_study(&t, &levels, &level(0.025), 800, 5, 1.0).unwrap();
    for j in 0..2 {
        let ratio = b.se[j] / a.se[j];
        assert!((ratio - 0.5f64.sqrt()).abs() <= 0.2 * 0.5f64.sqrt(), "ratio {ratio}");
    }
}
