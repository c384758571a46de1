//! Initial film profiles in edge-local coordinates `s ∈ [0, 1]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ProfileError;
use crate::grid::GraphGrid;

/// Vertex values from different edges may differ by at most this much.
pub const VERTEX_MATCH_TOL: f64 = 1e-12;

const RANDOM_MODES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialProfile {
    Constant {
        value: f64,
    },
    /// `base + height · max(0, 1 − ((s − center)/width)²)²`.
    Droplet {
        center: f64,
        width: f64,
        height: f64,
        base: f64,
    },
    /// Linear from `a` at `s = 0` to `b` at `s = 1`.
    Linear {
        a: f64,
        b: f64,
    },
    /// `base + amplitude · g(s)` with `g` a random positive combination of
    /// `(1 − cos 2πks)/2`, normalized to `[0, 1]`; equals `base` at both ends.
    Random {
        base: f64,
        amplitude: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

impl InitialProfile {
    pub fn check(&self, edge: usize) -> Result<(), ProfileError> {
        let invalid = |m: &str| {
            Err(ProfileError::Invalid {
                edge,
                message: m.to_string(),
            })
        };
        match *self {
            InitialProfile::Constant { value } if !(value >= 0.0) => {
                invalid("constant value must be nonnegative")
            }
            InitialProfile::Droplet {
                center,
                width,
                height,
                base,
            } => {
                if !(base >= 0.0) {
                    invalid("droplet base must be nonnegative")
                } else if !(height >= 0.0) {
                    invalid("droplet height must be nonnegative")
                } else if !(0.0..=1.0).contains(&center) {
                    invalid("droplet center must lie in [0, 1]")
                } else if !(width > 0.0) {
                    invalid("droplet width must be positive")
                } else {
                    Ok(())
                }
            }
            InitialProfile::Linear { a, b } if !(a >= 0.0 && b >= 0.0) => {
                invalid("linear endpoint values must be nonnegative")
            }
            InitialProfile::Random {
                base, amplitude, ..
            } if !(base >= 0.0 && amplitude >= 0.0) => {
                invalid("random base and amplitude must be nonnegative")
            }
            _ => Ok(()),
        }
    }

    /// Evaluates the profile on node coordinates `s_k = k / cells`.
    /// `fallback_seed` is used by random profiles without their own seed.
    pub fn sample(&self, cells: usize, fallback_seed: u64) -> Vec<f64> {
        let coords = (0..=cells).map(|k| k as f64 / cells as f64);
        match *self {
            InitialProfile::Constant { value } => vec![value; cells + 1],
            InitialProfile::Droplet {
                center,
                width,
                height,
                base,
            } => coords
                .map(|s| {
                    let x = (s - center) / width;
                    let bump = (1.0 - x * x).max(0.0);
                    base + height * bump * bump
                })
                .collect(),
            InitialProfile::Linear { a, b } => coords.map(|s| a + (b - a) * s).collect(),
            InitialProfile::Random {
                base,
                amplitude,
                seed,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(fallback_seed));
                let weights: Vec<f64> = (0..RANDOM_MODES).map(|_| rng.random::<f64>()).collect();
                let total: f64 = weights.iter().sum::<f64>().max(f64::MIN_POSITIVE);
                coords
                    .map(|s| {
                        let g: f64 = weights
                            .iter()
                            .enumerate()
                            .map(|(k, w)| {
                                w * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * (k + 1) as f64 * s).cos())
                            })
                            .sum();
                        base + amplitude * g / total
                    })
                    .collect()
            }
        }
    }
}

/// Per-edge samples of one profile on the grid of `edge`, nodes `0..=N_j`.
pub fn initial_profile(
    profile: &InitialProfile,
    grid: &GraphGrid,
    edge: usize,
    run_seed: u64,
) -> Result<Vec<f64>, ProfileError> {
    profile.check(edge)?;
    let cells = grid.cells(edge);
    let vals = profile.sample(cells, edge_seed(run_seed, edge));
    for (k, &v) in vals.iter().enumerate() {
        if !(v >= 0.0) {
            return Err(ProfileError::Negative {
                edge,
                s: k as f64 / cells as f64,
                value: v,
            });
        }
    }
    Ok(vals)
}

fn edge_seed(run_seed: u64, edge: usize) -> u64 {
    run_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(edge as u64 + 1)
}

/// Builds the global initial vector from one profile per edge. Vertex values
/// are the mean of the incident endpoint evaluations, which must agree to
/// [`VERTEX_MATCH_TOL`].
pub fn assemble_initial(
    grid: &GraphGrid,
    profiles: &[InitialProfile],
    run_seed: u64,
) -> Result<Vec<f64>, ProfileError> {
    let g = grid.graph();
    if profiles.len() != g.edge_count() {
        return Err(ProfileError::Count {
            expected: g.edge_count(),
            got: profiles.len(),
        });
    }
    let mut u = vec![0.0; grid.len()];
    let mut ends: Vec<Vec<f64>> = vec![Vec::new(); g.vertex_count()];
    for (j, p) in profiles.iter().enumerate() {
        let vals = initial_profile(p, grid, j, run_seed)?;
        let n = grid.cells(j);
        for k in 1..n {
            u[grid.node_index(j, k)] = vals[k];
        }
        let e = g.edge(j);
        ends[e.tail].push(vals[0]);
        ends[e.head].push(vals[n]);
    }
    for (v, vals) in ends.iter().enumerate() {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo > VERTEX_MATCH_TOL {
            return Err(ProfileError::VertexMismatch {
                vertex: g.vertex_name(v).to_string(),
                spread: hi - lo,
            });
        }
        u[v] = if hi == lo {
            lo
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        };
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphSpec, MetricGraph};

    fn star(cells: usize) -> GraphGrid {
        let g = MetricGraph::build(&GraphSpec::builtin("star3").unwrap()).unwrap();
        GraphGrid::uniform(&g, cells).unwrap()
    }

    fn droplet() -> InitialProfile {
        InitialProfile::Droplet {
            center: 1.0,
            width: 0.3,
            height: 1.0,
            base: 0.05,
        }
    }

    #[test]
    fn constant_samples() {
        let grid = star(4);
        let u = assemble_initial(&grid, &vec![InitialProfile::Constant { value: 0.2 }; 3], 0).unwrap();
        assert!(u.iter().all(|&x| x == 0.2));
    }

    #[test]
    fn symmetric_droplets_at_center() {
        let grid = star(30);
        let u = assemble_initial(&grid, &vec![droplet(); 3], 0).unwrap();
        assert!((u[0] - 1.05).abs() < 1e-15);
        assert!(u[1..4].iter().all(|x| (x - 0.05).abs() < 1e-15));
        let e0 = grid.edge_values(&u, 0);
        for j in 1..3 {
            assert_eq!(grid.edge_values(&u, j), e0);
        }
    }

    #[test]
    fn vertex_mismatch_is_rejected() {
        let grid = star(4);
        let mut profiles = vec![droplet(); 3];
        profiles[1] = InitialProfile::Droplet {
            center: 1.0,
            width: 0.3,
            height: 1.1,
            base: 0.05,
        };
        let err = assemble_initial(&grid, &profiles, 0).unwrap_err();
        assert!(matches!(err, ProfileError::VertexMismatch { ref vertex, .. } if vertex == "a0"));
    }

    #[test]
    fn invalid_profiles() {
        let bad = InitialProfile::Droplet {
            center: 1.5,
            width: 0.3,
            height: 1.0,
            base: 0.0,
        };
        assert!(bad.check(0).is_err());
        assert!(InitialProfile::Constant { value: -1.0 }.check(0).is_err());
        assert!(InitialProfile::Linear { a: 0.0, b: -0.1 }.check(0).is_err());
    }

    #[test]
    fn random_profile_is_seeded_and_pinned_at_ends() {
        let p = InitialProfile::Random {
            base: 0.1,
            amplitude: 0.5,
            seed: Some(7),
        };
        let a = p.sample(20, 0);
        assert_eq!(a, p.sample(20, 99));
        assert!((a[0] - 0.1).abs() < 1e-15 && (a[20] - 0.1).abs() < 1e-12);
        assert!(a.iter().all(|&x| (0.1..=0.6 + 1e-12).contains(&x)));
        let q = InitialProfile::Random {
            base: 0.1,
            amplitude: 0.5,
            seed: None,
        };
        assert_ne!(q.sample(20, 1), q.sample(20, 2));
    }
}
