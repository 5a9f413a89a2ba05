//! Reference spaces and activation listings for the CLI.

use tvsnet::activations::{detect_polynomial, CATALOG_IDS};
use tvsnet::quadrature::GridSpec;
use tvsnet::{Activation, Space, SpaceDescriptor};

/// One space per kind plus extra exponents for the `p`-parametrized kinds.
pub fn reference_spaces() -> Vec<Space> {
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

pub fn spaces_listing() -> String {
    let mut out = String::from("kind\tconfig example\n");
    let examples = [
        ("euclidean", r#"{"kind":"euclidean","params":{"dim":5}}"#),
        ("matrix", r#"{"kind":"matrix","params":{"rows":3,"cols":4}}"#),
        ("lp_seq", r#"{"kind":"lp_seq","params":{"p":2.0,"len":16,"decay":1.0}}"#),
        ("c0_seq", r#"{"kind":"c0_seq","params":{"len":16,"decay":1.0}}"#),
        (
            "lp_fun",
            r#"{"kind":"lp_fun","params":{"p":2.0,"grid":{"a":0.0,"b":1.0,"panels":4,"order":16}}}"#,
        ),
        ("c_fun", r#"{"kind":"c_fun","params":{"grid":{"a":0.0,"b":1.0,"panels":4,"order":16}}}"#),
    ];
    for (kind, json) in examples {
        out.push_str(&format!("{kind}\t{json}\n"));
    }
    out
}

pub fn activations_listing() -> String {
    let mut out = String::from("id\tsmooth\tpolynomial degree on [-4, 4]\n");
    let samples = [
        Activation::Relu,
        Activation::Tanh,
        Activation::Sigmoid,
        Activation::Exp,
        Activation::Sin,
    ];
    for a in samples {
        let degree = detect_polynomial(&a, 12, (-4.0, 4.0)).map_or("none".to_string(), |d| d.to_string());
        out.push_str(&format!("{}\t{}\t{degree}\n", a.id(), a.is_smooth()));
    }
    for id in &CATALOG_IDS[5..] {
        out.push_str(&format!("{id}\tdepends\tdepends\n"));
    }
    out
}
