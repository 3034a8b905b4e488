//! Named model definitions, written in the configuration format.

macro_rules! z1 {
    ($body:expr) => {
        concat!("[graph]\npreset = nearest-neighbor\ndimension = 1\n", $body)
    };
}

/// `(name, description, model sections)`.
pub const PRESETS: &[(&str, &str, &str)] = &[
    (
        "drift-z1",
        "Z, steps (0.9, 0.1), offspring 1 or 2 with equal mass (m* = 1.5); transient",
        z1!("[environment]\ngamma = 0.05\nlaw = 0.9 0.1\n[offspring]\ndist = 1:0.5 2:0.5\n"),
    ),
    (
        "drift-z1-recurrent",
        "Z, steps (0.9, 0.1), offspring 1:0.2 2:0.8 (m* = 1.8); strongly recurrent",
        z1!("[environment]\ngamma = 0.05\nlaw = 0.9 0.1\n[offspring]\ndist = 1:0.2 2:0.8\n"),
    ),
    (
        "symmetric-z1",
        "Z, symmetric steps, m* = 1.5; strongly recurrent",
        z1!("[environment]\ngamma = 0.05\nlaw = 0.5 0.5\n[offspring]\ndist = 1:0.5 2:0.5\n"),
    ),
    (
        "zero-drift-pair",
        "Z, step laws (0.8, 0.2) and (0.2, 0.8); zero drift in the hull, rho = 1",
        z1!("[environment]\ngamma = 0.05\nlaw = 0.8 0.2\nlaw = 0.2 0.8\n[offspring]\ndist = 1:0.5 2:0.5\n"),
    ),
    (
        "drift-pair",
        "Z, step laws (0.9, 0.1) and (0.7, 0.3); rho = 2 sqrt(0.21)",
        z1!("[environment]\ngamma = 0.05\nlaw = 0.9 0.1\nlaw = 0.7 0.3\n[offspring]\ndist = 1:0.5 2:0.5\n"),
    ),
    (
        "nn-z2",
        "Z^2 nearest neighbour, steps (0.4, 0.1, 0.4, 0.1), m* = 1.2; transient",
        "[graph]\npreset = nearest-neighbor\ndimension = 2\n[environment]\ngamma = 0.05\nlaw = 0.4 0.1 0.4 0.1\n[offspring]\ndist = 1:0.8 2:0.2\n",
    ),
    (
        "random-drift-z1",
        "Z, step laws (0.9, 0.1) and (0.95, 0.05), offspring 1:0.5 2:0.5 or 1:1; transient",
        z1!("[environment]\ngamma = 0.01\nlaw = 0.9 0.1\nlaw = 0.95 0.05\n[offspring]\ndist = 1:0.5 2:0.5\ndist = 1:1\n"),
    ),
    (
        "boundary-z1",
        "Z, steps (0.8, 0.2), m* = 1.25 = 1/rho exactly; transient by the weak inequality",
        z1!("[environment]\ngamma = 0.05\nlaw = 0.8 0.2\n[offspring]\ndist = 1:0.75 2:0.25\n"),
    ),
];

/// Model sections for `name`, or `None` for an unknown preset.
pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _, _)| *n == name).map(|(_, _, body)| *body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn every_preset_parses_and_validates() {
        for (name, _, _) in PRESETS {
            let c = parse_config(&format!("preset = {name}\n")).unwrap_or_else(|e| panic!("{name}: {e}"));
            c.spec().unwrap();
        }
        assert!(preset_text("missing").is_none());
    }
}
