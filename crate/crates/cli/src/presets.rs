//! Built-in configurations, shipped as TOML files under `presets/`.

const PRESETS: [(&str, &str); 6] = [
    ("fig2-point", include_str!("../presets/fig2-point.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4a", include_str!("../presets/fig4a.toml")),
    ("fig5a", include_str!("../presets/fig5a.toml")),
    ("qsl", include_str!("../presets/qsl.toml")),
    ("tomo", include_str!("../presets/tomo.toml")),
];

pub fn get(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}
