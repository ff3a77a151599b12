//! Bundled robot models used by the examples, tests and the simulator.

use crate::model::{parse_model, RobotModel};

pub const QUADRUPED_TOML: &str = include_str!("../fixtures/quadruped.toml");
pub const THREE_LINK_TOML: &str = include_str!("../fixtures/three_link.toml");
pub const SINGLE_LINK_TOML: &str = include_str!("../fixtures/single_link.toml");

/// 12-joint quadruped with four point feet.
pub fn quadruped() -> RobotModel {
    parse_model(QUADRUPED_TOML, "quadruped.toml").expect("bundled model is valid")
}

/// Floating base with two hanging links, suspended from two pivot contacts.
pub fn three_link() -> RobotModel {
    parse_model(THREE_LINK_TOML, "three_link.toml").expect("bundled model is valid")
}

pub fn single_link() -> RobotModel {
    parse_model(SINGLE_LINK_TOML, "single_link.toml").expect("bundled model is valid")
}

/// Looks up a bundled model by name (`quadruped`, `three_link`, `single_link`).
pub fn by_name(name: &str) -> Option<RobotModel> {
    match name {
        "quadruped" => Some(quadruped()),
        "three_link" => Some(three_link()),
        "single_link" => Some(single_link()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_models_load() {
        let q = quadruped();
        assert_eq!(q.n_joints(), 12);
        assert_eq!(q.contact_frames().len(), 4);
        assert!((q.total_mass() - 2.5).abs() < 1e-12);
        let t = three_link();
        assert_eq!((t.n_joints(), t.n_links()), (2, 3));
        assert_eq!(single_link().n_joints(), 0);
    }
}
