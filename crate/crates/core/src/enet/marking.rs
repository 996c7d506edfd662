//! Markings: kernel occupancy plus pending resolution values.

use std::collections::BTreeMap;

use super::attr::Kernel;
use super::net::{NetDefinition, PlaceId};

/// Place capacity is one: a place either holds a kernel or is empty.
/// Resolution places never appear in the occupancy map; they hold pending
/// decision values (output indices) instead.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Marking {
    occupancy: BTreeMap<PlaceId, Kernel>,
    resolutions: BTreeMap<PlaceId, usize>,
}

impl Marking {
    pub fn empty() -> Self {
        Marking::default()
    }

    /// M0 of a net: one kernel (id 0) seeded with the declared attributes.
    pub fn initial(net: &NetDefinition) -> Self {
        let mut m = Marking::empty();
        m.occupancy.insert(
            net.initial.place.clone(),
            Kernel::with_attrs(0, net.initial.attrs.clone()),
        );
        m
    }

    pub fn kernel_at(&self, place: &PlaceId) -> Option<&Kernel> {
        self.occupancy.get(place)
    }

    pub fn kernel_at_mut(&mut self, place: &PlaceId) -> Option<&mut Kernel> {
        self.occupancy.get_mut(place)
    }

    pub fn is_occupied(&self, place: &PlaceId) -> bool {
        self.occupancy.contains_key(place)
    }

    pub fn kernel_count(&self) -> usize {
        self.occupancy.len()
    }

    pub fn occupied_places(&self) -> impl Iterator<Item = &PlaceId> {
        self.occupancy.keys()
    }

    pub fn place_kernel(&mut self, place: PlaceId, kernel: Kernel) {
        let prior = self.occupancy.insert(place, kernel);
        debug_assert!(prior.is_none(), "capacity-one discipline breached");
    }

    pub fn take_kernel(&mut self, place: &PlaceId) -> Option<Kernel> {
        self.occupancy.remove(place)
    }

    pub fn pending_resolution(&self, place: &PlaceId) -> Option<usize> {
        self.resolutions.get(place).copied()
    }

    pub fn set_resolution(&mut self, place: PlaceId, index: usize) {
        self.resolutions.insert(place, index);
    }

    pub fn take_resolution(&mut self, place: &PlaceId) -> Option<usize> {
        self.resolutions.remove(place)
    }
}
