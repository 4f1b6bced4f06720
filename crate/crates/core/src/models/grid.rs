use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::forest::{Criterion, MaxFeatures};
use super::mlp::validate_widths;
use super::{Family, Hyperparameters};

pub const LR_C: [f64; 6] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];
pub const MLP_ALPHA: [f64; 6] = [1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];
pub const MLP_SCHEDULES: [[usize; 5]; 3] = [
    [256, 128, 64, 32, 16],
    [128, 64, 32, 16, 8],
    [64, 32, 16, 8, 4],
];
pub const RF_TREES: [usize; 3] = [100, 300, 500];
pub const RF_MAX_FEATURES: [MaxFeatures; 2] = [MaxFeatures::Sqrt, MaxFeatures::Log2];
pub const RF_DEPTHS: [usize; 3] = [4, 6, 8];
pub const RF_CRITERIA: [Criterion; 2] = [Criterion::Gini, Criterion::Entropy];
pub const AB_ESTIMATORS: [usize; 5] = [10, 50, 100, 250, 500];
pub const AB_LEARNING_RATES: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];

/// Replacement value lists for any axis of the default grids.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridOverrides {
    pub lr_c: Option<Vec<f64>>,
    pub mlp_alpha: Option<Vec<f64>>,
    pub mlp_widths: Option<Vec<Vec<usize>>>,
    pub rf_n_estimators: Option<Vec<usize>>,
    pub rf_max_features: Option<Vec<MaxFeatures>>,
    pub rf_max_depth: Option<Vec<usize>>,
    pub rf_criterion: Option<Vec<Criterion>>,
    pub rf_bootstrap: Option<bool>,
    pub ab_n_estimators: Option<Vec<usize>>,
    pub ab_learning_rate: Option<Vec<f64>>,
}

fn axis<T: Clone>(name: &str, over: &Option<Vec<T>>, default: &[T]) -> Result<Vec<T>> {
    match over {
        Some(v) if v.is_empty() => Err(Error::Config(format!("grid axis {name} is empty"))),
        Some(v) => Ok(v.clone()),
        None => Ok(default.to_vec()),
    }
}

fn positive(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        Some(bad) => Err(Error::Config(format!("{name} value {bad} must be positive"))),
        None => Ok(()),
    }
}

/// Default grid for `family`.
pub fn hyperparameter_grid(family: Family) -> Vec<Hyperparameters> {
    grid_with(family, &GridOverrides::default()).expect("default grids are valid")
}

/// Grid for `family` in a fixed nested order, with any overridden axes.
pub fn grid_with(family: Family, o: &GridOverrides) -> Result<Vec<Hyperparameters>> {
    let mut out = Vec::new();
    match family {
        Family::Lr => {
            let cs = axis("lr_c", &o.lr_c, &LR_C)?;
            positive("lr_c", &cs)?;
            out.extend(cs.into_iter().map(|c| Hyperparameters::Lr { c }));
        }
        Family::Mlp => {
            let alphas = axis("mlp_alpha", &o.mlp_alpha, &MLP_ALPHA)?;
            positive("mlp_alpha", &alphas)?;
            let defaults: Vec<Vec<usize>> = MLP_SCHEDULES.iter().map(|s| s.to_vec()).collect();
            let widths = axis("mlp_widths", &o.mlp_widths, &defaults)?;
            for w in &widths {
                validate_widths(w)?;
            }
            for w in &widths {
                for &alpha in &alphas {
                    out.push(Hyperparameters::Mlp {
                        alpha,
                        widths: w.clone(),
                    });
                }
            }
        }
        Family::Rf => {
            let trees = axis("rf_n_estimators", &o.rf_n_estimators, &RF_TREES)?;
            let mf = axis("rf_max_features", &o.rf_max_features, &RF_MAX_FEATURES)?;
            let depths = axis("rf_max_depth", &o.rf_max_depth, &RF_DEPTHS)?;
            let crit = axis("rf_criterion", &o.rf_criterion, &RF_CRITERIA)?;
            if trees.contains(&0) || depths.contains(&0) {
                return Err(Error::Config("random forest sizes must be positive".into()));
            }
            let bootstrap = o.rf_bootstrap.unwrap_or(true);
            for &n_estimators in &trees {
                for &max_features in &mf {
                    for &max_depth in &depths {
                        for &criterion in &crit {
                            out.push(Hyperparameters::Rf {
                                n_estimators,
                                max_features,
                                max_depth,
                                criterion,
                                bootstrap,
                            });
                        }
                    }
                }
            }
        }
        Family::Ab => {
            let ns = axis("ab_n_estimators", &o.ab_n_estimators, &AB_ESTIMATORS)?;
            let lrs = axis("ab_learning_rate", &o.ab_learning_rate, &AB_LEARNING_RATES)?;
            positive("ab_learning_rate", &lrs)?;
            if ns.contains(&0) {
                return Err(Error::Config("AdaBoost needs at least one estimator".into()));
            }
            for &n_estimators in &ns {
                for &learning_rate in &lrs {
                    out.push(Hyperparameters::Ab {
                        n_estimators,
                        learning_rate,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(hyperparameter_grid(Family::Lr).len(), 6);
        assert_eq!(hyperparameter_grid(Family::Mlp).len(), 18);
        assert_eq!(hyperparameter_grid(Family::Rf).len(), 36);
        assert_eq!(hyperparameter_grid(Family::Ab).len(), 25);
    }

    #[test]
    fn ranges_match_table() {
        let cs: Vec<f64> = hyperparameter_grid(Family::Lr)
            .iter()
            .map(|h| match h {
                Hyperparameters::Lr { c } => *c,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(cs.first(), Some(&1e-5));
        assert_eq!(cs.last(), Some(&1.0));
        let ns: Vec<usize> = hyperparameter_grid(Family::Ab)
            .iter()
            .map(|h| match h {
                Hyperparameters::Ab { n_estimators, .. } => *n_estimators,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(ns.iter().min(), Some(&10));
        assert_eq!(ns.iter().max(), Some(&500));
    }

    #[test]
    fn overrides_replace_axes() {
        let o = GridOverrides {
            rf_n_estimators: Some(vec![10]),
            rf_max_depth: Some(vec![4]),
            ..Default::default()
        };
        assert_eq!(grid_with(Family::Rf, &o).unwrap().len(), 4);
        let bad = GridOverrides {
            lr_c: Some(vec![]),
            ..Default::default()
        };
        assert!(grid_with(Family::Lr, &bad).is_err());
        let bad_widths = GridOverrides {
            mlp_widths: Some(vec![vec![8, 16, 32, 64, 128]]),
            ..Default::default()
        };
        assert!(grid_with(Family::Mlp, &bad_widths).is_err());
    }
}
