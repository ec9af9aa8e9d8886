/// Scenario files shipped with the crate, by name.
pub const BUILTINS: &[(&str, &str)] = &[
    ("pn_exp_circle", include_str!("../../../../scenarios/pn_exp_circle.ini")),
    ("pn_extensible_control", include_str!("../../../../scenarios/pn_extensible_control.ini")),
    ("pn_generic_audit", include_str!("../../../../scenarios/pn_generic_audit.ini")),
    ("pn_inextensible", include_str!("../../../../scenarios/pn_inextensible.ini")),
    ("pn_zero_flow", include_str!("../../../../scenarios/pn_zero_flow.ini")),
    ("psn_generic_audit", include_str!("../../../../scenarios/psn_generic_audit.ini")),
    ("psn_parabola", include_str!("../../../../scenarios/psn_parabola.ini")),
    ("psn_zero_flow", include_str!("../../../../scenarios/psn_zero_flow.ini")),
];

pub fn builtin(name: &str) -> Option<&'static str> {
    BUILTINS.iter().find(|(n, _)| *n == name).map(|(_, src)| *src)
}

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTINS.iter().map(|(n, _)| *n)
}
