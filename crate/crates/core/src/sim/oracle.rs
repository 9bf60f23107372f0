use crate::domain::{Action, Phase, VehicleState, WorldState};

/// Conflicting, not-yet-cleared vehicles that `v` has to let through first:
/// anyone already in the box, any stop-runner, and anyone ranked earlier.
pub fn blockers<'a>(s: &'a WorldState, v: &'a VehicleState) -> impl Iterator<Item = &'a VehicleState> + 'a {
    s.vehicles().filter(move |u| {
        u.id != v.id
            && !u.is_cleared()
            && v.conflicts_with(u)
            && (u.in_box() || !u.compliant || u.arrival_rank < v.arrival_rank)
    })
}

/// Whether a compliant driver in `v` has to hold at the line.
pub fn must_wait(s: &WorldState, v: &VehicleState) -> bool {
    s.pedestrian_in_path(v.movement()) || blockers(s, v).next().is_some()
}

/// The safe action for the ego, computed on the true state.
///
/// Pedestrians in the ego path demand STOP. Any blocker (stop-runner, vehicle
/// in the box, earlier arrival; simultaneous arrivals are already ordered by
/// the right-hand rule inside the ranks) demands YIELD while approaching and
/// STOP once at the line. Otherwise GO.
pub fn ground_truth_action(s: &WorldState) -> Action {
    match s.ego.phase {
        Phase::InIntersection | Phase::Cleared => return Action::Go,
        Phase::Approaching | Phase::AtLine => {}
    }
    if s.collision_occurred {
        return Action::Stop;
    }
    if s.pedestrian_in_ego_path() {
        return Action::Stop;
    }
    if blockers(s, &s.ego).next().is_some() {
        return if s.ego.phase == Phase::AtLine { Action::Stop } else { Action::Yield };
    }
    Action::Go
}
