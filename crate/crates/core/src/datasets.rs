//! The two published reference mixtures and their known contributor profiles.
//!
//! Sizes are repeat-number corrected relative peak areas as published; they
//! are renormalized per marker on construction.

use crate::model::{MarkerData, MixtureDataset, Profile};

type Table = &'static [(&'static str, &'static [(&'static str, f64)])];

const EVETT: Table = &[
    ("D8", &[("10", 0.4347), ("11", 0.0285), ("14", 0.5368)]),
    ("D18", &[("13", 0.8871), ("16", 0.0536), ("17", 0.0592)]),
    ("D21", &[("59", 0.0525), ("65", 0.0676), ("67", 0.4284), ("70", 0.4515)]),
    ("FGA", &[("21", 0.5699), ("22", 0.3908), ("23", 0.0393)]),
    ("TH01", &[("8", 0.4015), ("9.3", 0.5985)]),
    ("VWA", &[("16", 0.4170), ("17", 0.0884), ("18", 0.4747), ("19", 0.0199)]),
];

const PERLIN: Table = &[
    ("D2", &[("16", 0.1339), ("18", 0.2992), ("20", 0.1947), ("21", 0.3722)]),
    ("D3", &[("14", 0.5010), ("15", 0.4990)]),
    ("D8", &[("9", 0.2832), ("12", 0.1426), ("13", 0.3829), ("14", 0.1913)]),
    ("D16", &[("11", 0.6801), ("13", 0.1607), ("14", 0.1593)]),
    ("D18", &[("12", 0.1504), ("13", 0.3290), ("14", 0.3443), ("17", 0.1764)]),
    ("D19", &[("12.2", 0.3109), ("14", 0.3092), ("15", 0.3799)]),
    ("D21", &[("27", 0.1289), ("29", 0.3913), ("30", 0.4798)]),
    ("FGA", &[("19", 0.4621), ("24", 0.1561), ("25.2", 0.3817)]),
    ("TH01", &[("6", 0.1268), ("7", 0.4691), ("9", 0.4041)]),
    ("VWA", &[("17", 0.7265), ("18", 0.2735)]),
];

fn build(table: Table) -> MixtureDataset {
    let markers = table
        .iter()
        .map(|(m, pairs)| MarkerData::from_pairs(m, pairs).expect("reference table is valid"))
        .collect();
    MixtureDataset::new(markers).expect("reference table is valid")
}

/// 10:1 mixture; only the major contributor's profile is known.
pub fn evett() -> MixtureDataset {
    build(EVETT)
}

/// 7:3 mixture with both contributors known.
pub fn perlin() -> MixtureDataset {
    build(PERLIN)
}

fn profile(name: &str, genotypes: &[(&str, &str, &str)]) -> Profile {
    genotypes.iter().fold(Profile::new(name), |p, (m, a, b)| p.with(*m, a, b))
}

pub fn evett_major() -> Profile {
    profile(
        "evett_major",
        &[
            ("D8", "10", "14"),
            ("D18", "13", "13"),
            ("D21", "67", "70"),
            ("FGA", "21", "22"),
            ("TH01", "8", "9.3"),
            ("VWA", "16", "18"),
        ],
    )
}

pub fn perlin_major() -> Profile {
    profile(
        "perlin_major",
        &[
            ("D2", "18", "21"),
            ("D3", "14", "15"),
            ("D8", "9", "13"),
            ("D16", "11", "11"),
            ("D18", "13", "14"),
            ("D19", "12.2", "15"),
            ("D21", "29", "30"),
            ("FGA", "19", "25.2"),
            ("TH01", "7", "9"),
            ("VWA", "17", "17"),
        ],
    )
}

pub fn perlin_minor() -> Profile {
    profile(
        "perlin_minor",
        &[
            ("D2", "16", "20"),
            ("D3", "14", "15"),
            ("D8", "12", "14"),
            ("D16", "13", "14"),
            ("D18", "12", "17"),
            ("D19", "14", "14"),
            ("D21", "27", "30"),
            ("FGA", "19", "24"),
            ("TH01", "6", "7"),
            ("VWA", "18", "18"),
        ],
    )
}
