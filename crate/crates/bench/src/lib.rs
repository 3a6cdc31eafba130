//! Shared fixtures for the criterion benches.

use std::sync::Arc;

use ssm_core::{compute_autonomous_ssm, presets, AutonomousSsm, ModalModel};

/// Shaw–Pierre modal model with its order-`order` autonomous expansion.
pub fn shaw_pierre(order: u32) -> (Arc<ModalModel>, Arc<AutonomousSsm>) {
    let mm = presets::shaw_pierre_modal();
    let ssm = compute_autonomous_ssm(&mm, order).expect("Shaw–Pierre expansion");
    (Arc::new(mm), Arc::new(ssm))
}

/// 25-element cantilever, first mode.
pub fn beam() -> ModalModel {
    presets::modal(&presets::beam(25))
}
