//! Scenarios compiled into the binary.

pub const CANNED: &[(&str, &str)] = &[
    ("example_4_1", include_str!("../scenarios/example_4_1.toml")),
    ("example_4_2", include_str!("../scenarios/example_4_2.toml")),
    (
        "allen_cahn_5_1",
        include_str!("../scenarios/allen_cahn_5_1.toml"),
    ),
    (
        "heat_benchmark",
        include_str!("../scenarios/heat_benchmark.toml"),
    ),
];

pub fn canned(name: &str) -> Option<&'static str> {
    CANNED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    CANNED.iter().map(|(n, _)| *n)
}
