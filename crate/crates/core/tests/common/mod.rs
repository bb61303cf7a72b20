#![allow(dead_code)]

pub mod oracle;

use std::collections::BTreeSet;

use ldi_core::builder::BuildOutput;
use ldi_core::InstanceMap;

/// Counts of pixels breaking each background validity rule.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct Violations {
    pub not_behind: usize,
    pub same_instance: usize,
    pub from_occluder: usize,
}

impl Violations {
    pub fn total(&self) -> usize {
        self.not_behind + self.same_instance + self.from_occluder
    }
}

pub fn check_validity(out: &BuildOutput, ref_instances: &InstanceMap, eps: f64) -> Violations {
    let ldi = &out.ldi;
    let mut v = Violations {
        not_behind: ldi.depth_order_violations(eps).len(),
        ..Violations::default()
    };
    for i in 0..ref_instances.len() {
        if !ldi.fg_mask[i] || !ldi.background.valid[i] {
            continue;
        }
        let inst = out.background_instance[i].expect("valid background pixel has a source instance");
        if inst == ref_instances[i] {
            v.same_instance += 1;
        }
        if out.occluders.contains(inst) {
            v.from_occluder += 1;
        }
    }
    v
}

/// Instance ids appearing in both the background layer and the reference
/// foreground.
pub fn shared_instances(out: &BuildOutput, ref_instances: &InstanceMap) -> BTreeSet<u32> {
    let bg: BTreeSet<u32> = (0..ref_instances.len())
        .filter(|&i| out.ldi.fg_mask[i] && out.ldi.background.valid[i])
        .filter_map(|i| out.background_instance[i])
        .collect();
    let fg: BTreeSet<u32> = (0..ref_instances.len())
        .filter(|&i| out.ldi.fg_mask[i])
        .map(|i| ref_instances[i])
        .collect();
    bg.intersection(&fg).copied().collect()
}
