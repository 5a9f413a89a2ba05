#![allow(dead_code)]

use rand::Rng;
use rand_distr::StandardNormal;
use tvsnet::quadrature::GridSpec;
use tvsnet::spaces::Atom;
use tvsnet::{Element, Functional, Space, SpaceDescriptor};

/// One space per kind, plus extra exponents for the `p`-parametrized kinds.
pub fn all_spaces() -> Vec<Space> {
    vec![
        SpaceDescriptor::euclidean(5).unwrap(),
        SpaceDescriptor::matrix(3, 4).unwrap(),
        SpaceDescriptor::lp_seq(2.0, 16, 1.0).unwrap(),
        SpaceDescriptor::lp_seq(1.5, 12, 0.5).unwrap(),
        SpaceDescriptor::lp_seq(3.0, 10, 2.0).unwrap(),
        SpaceDescriptor::c0_seq(16, 1.0).unwrap(),
        SpaceDescriptor::lp_fun(2.0, GridSpec::new(0.0, 1.0)).unwrap(),
        SpaceDescriptor::lp_fun(1.25, GridSpec::new(-1.0, 2.0)).unwrap(),
        SpaceDescriptor::lp_fun(4.0, GridSpec::with_nodes(0.0, 1.0, 2, 8)).unwrap(),
        SpaceDescriptor::c_fun(GridSpec::new(0.0, 1.0)).unwrap(),
    ]
}

pub fn random_element<R: Rng>(space: &Space, rng: &mut R, scale: f64) -> Element {
    let coeffs = (0..space.dim())
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Element::new(space.clone(), coeffs).unwrap()
}

/// Normal dual coordinates; measures on `c_fun` also get three random atoms.
pub fn random_functional<R: Rng>(space: &Space, rng: &mut R) -> Functional {
    let rep: Vec<f64> = (0..space.dim()).map(|_| rng.sample(StandardNormal)).collect();
    match space.grid() {
        Some(grid) if space.kind().tag() == "c_fun" => {
            let atoms = (0..3)
                .map(|_| Atom {
                    location: rng.random_range(grid.spec.a..=grid.spec.b),
                    weight: rng.sample(StandardNormal),
                })
                .collect();
            Functional::with_atoms(space.clone(), rep, atoms).unwrap()
        }
        _ => Functional::new(space.clone(), rep).unwrap(),
    }
}
