//! Scenarios shipped with the binary.

pub const NAMES: &[&str] = &[
    "fixed-point",
    "shell-onto-sphere",
    "far-source",
    "riesz-ball",
    "nested-chains",
];

pub fn builtin(name: &str) -> Option<&'static str> {
    Some(match name {
        "fixed-point" => include_str!("../scenarios/fixed-point.json"),
        "shell-onto-sphere" => include_str!("../scenarios/shell-onto-sphere.json"),
        "far-source" => include_str!("../scenarios/far-source.json"),
        "riesz-ball" => include_str!("../scenarios/riesz-ball.json"),
        "nested-chains" => include_str!("../scenarios/nested-chains.json"),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    #[test]
    fn all_builtins_parse() {
        for name in NAMES {
            let s = parse_scenario(builtin(name).unwrap()).unwrap();
            assert_eq!(&s.name, name);
        }
    }
}
