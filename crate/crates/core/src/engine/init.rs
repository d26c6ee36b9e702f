//! Restriction-map initialization.

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal, Uniform};

use super::config::{InitKind, InitSpec};
use crate::error::{Error, Result};
use crate::rng;
use crate::sheaf::{RestrictionMaps, SheafGraph};

/// Draws every `P_ij` from `spec`, visiting vertices and their adjacency
/// lists in order from a single seeded stream.
pub fn init_maps(spec: &InitSpec, sheaf: &SheafGraph) -> Result<RestrictionMaps> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed, rng::MAPS);
    let normal =
        |sigma: f64| Normal::new(0.0, sigma).map_err(|e| Error::param("sigma", e.to_string()));
    match spec.kind {
        InitKind::Gaussian { sigma } => {
            let dist = normal(sigma)?;
            Ok(RestrictionMaps::from_fn(sheaf, |_, _, r, c| {
                DMatrix::from_fn(r, c, |_, _| dist.sample(&mut rng))
            }))
        }
        InitKind::Uniform { a } => {
            let dist =
                Uniform::new_inclusive(-a, a).map_err(|e| Error::param("a", e.to_string()))?;
            Ok(RestrictionMaps::from_fn(sheaf, |_, _, r, c| {
                DMatrix::from_fn(r, c, |_, _| dist.sample(&mut rng))
            }))
        }
        InitKind::Orthogonal => {
            let g = sheaf.graph();
            for i in 0..g.n_vertices() {
                for inc in g.adjacency(i) {
                    let (r, c) = (sheaf.edge_dim(inc.edge), sheaf.stalk_dim(i));
                    if r > c {
                        return Err(Error::param(
                            "init",
                            format!(
                                "orthogonal maps need d_ij <= d_i, edge ({i},{}) has {r} > {c}",
                                inc.neighbor
                            ),
                        ));
                    }
                }
            }
            let dist = normal(1.0)?;
            Ok(RestrictionMaps::from_fn(sheaf, |_, _, r, c| {
                let a = DMatrix::from_fn(c, r, |_, _| dist.sample(&mut rng));
                a.qr().q().transpose()
            }))
        }
        InitKind::IdentityPlusNoise { sigma } => {
            let dist = normal(sigma)?;
            Ok(RestrictionMaps::from_fn(sheaf, |_, _, r, c| {
                DMatrix::from_fn(
                    r,
                    c,
                    |a, b| if a == b { 1.0 } else { 0.0 } + dist.sample(&mut rng),
                )
            }))
        }
        InitKind::Identity => Ok(RestrictionMaps::from_fn(sheaf, |_, _, r, c| {
            DMatrix::identity(r, c)
        })),
        InitKind::Zeros => Ok(RestrictionMaps::zeros(sheaf)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sheaf::{build_sheaf, EdgeDims, Graph};

    fn path(d: usize, edge: usize) -> SheafGraph {
        let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        build_sheaf(g, vec![d; 3], EdgeDims::Explicit(vec![edge; 2])).unwrap()
    }

    #[test]
    fn orthogonal_rows() {
        let s = path(8, 3);
        let maps = init_maps(&InitSpec::new(InitKind::Orthogonal, 5), &s).unwrap();
        for p in maps.iter() {
            assert!(
                (p * p.transpose() - DMatrix::<f64>::identity(3, 3))
                    .abs()
                    .max()
                    <= 1e-10
            );
        }
    }

    #[test]
    fn orthogonal_rejects_wide_edges() {
        let s = path(2, 3);
        assert!(init_maps(&InitSpec::new(InitKind::Orthogonal, 0), &s).is_err());
    }

    #[test]
    fn uniform_bounds_and_seeding() {
        let s = path(6, 2);
        let spec = InitSpec::new(InitKind::Uniform { a: 0.01 }, 3);
        let maps = init_maps(&spec, &s).unwrap();
        assert!(maps.iter().all(|p| p.iter().all(|x| x.abs() <= 0.01)));
        assert_eq!(maps, init_maps(&spec, &s).unwrap());
        assert_ne!(
            maps,
            init_maps(&InitSpec::new(InitKind::Uniform { a: 0.01 }, 4), &s).unwrap()
        );
    }

    #[test]
    fn identity_plus_noise_is_near_identity() {
        let s = path(4, 2);
        let maps = init_maps(
            &InitSpec::new(InitKind::IdentityPlusNoise { sigma: 1e-6 }, 0),
            &s,
        )
        .unwrap();
        for p in maps.iter() {
            assert!((p - DMatrix::<f64>::identity(2, 4)).abs().max() < 1e-4);
        }
    }

    #[test]
    fn gaussian_moments() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        let s = build_sheaf(g, vec![200; 2], EdgeDims::Gamma(1.0)).unwrap();
        let maps = init_maps(&InitSpec::new(InitKind::Gaussian { sigma: 1.0 }, 1), &s).unwrap();
        let vals: Vec<f64> = maps.iter().flat_map(|p| p.iter().copied()).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }
}
