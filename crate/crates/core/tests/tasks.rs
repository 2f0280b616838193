use lidarnav::geometry::{Pose, Vec2};
use lidarnav::planner::{resample_subgoals, PlannedPath};
use lidarnav::rng::SeededRng;
use lidarnav::sim::{Action, RobotState, Status};
use lidarnav::tasks::{
    build_observation, compute_reward, min_scan_range, ObservationContext, ObservationSpec, ProgressReference,
    RewardWeights, TaskError, Transition,
};
use proptest::prelude::*;

fn state(p: Vec2, h: f64) -> RobotState {
    RobotState {
        pose: Pose::new(p, h),
        velocity: Action::new(0.4, -0.1, 0.3),
        prev_command: Action::new(0.5, 0.0, 0.2),
    }
}

#[test]
fn layout_dimensions_and_order() {
    let plain = ObservationSpec::new(false);
    let full = ObservationSpec::new(true);
    assert_eq!((plain.dim(), full.dim()), (1209, 1219));
    let names: Vec<&str> = full.layout().iter().map(|b| b.name).collect();
    assert_eq!(names, ["lidar", "goal_vector", "goal_distance", "velocity", "prev_command", "subgoals"]);
    let mut offset = 0;
    for b in full.layout() {
        assert_eq!(b.offset, offset);
        offset += b.len;
    }
    assert_eq!(offset, 1219);
}

#[test]
fn goal_and_subgoals_rotate_into_the_body_frame() {
    let mut rng = SeededRng::new(31);
    let spec = ObservationSpec::new(true);
    for _ in 0..50 {
        let h = rng.uniform(-3.1, 3.1);
        let p = Vec2::new(rng.uniform(1.0, 9.0), rng.uniform(1.0, 9.0));
        let goal = Vec2::new(rng.uniform(1.0, 9.0), rng.uniform(1.0, 9.0));
        let s = state(p, h);
        let path = PlannedPath::from_waypoints(vec![p, Vec2::new(p.x + 1.0, p.y + 0.5), goal]);
        let sg = resample_subgoals(&path, p);
        let ctx = ObservationContext {
            state: &s,
            goal,
            goal_radius: 0.25,
            world_diagonal: 14.0,
            subgoals: Some(&sg),
        };
        let obs = build_observation(&spec, &vec![0.7; 1200], &ctx).unwrap();
        // explicit rotation by -h
        let rot = |v: Vec2| Vec2::new(h.cos() * v.x + h.sin() * v.y, -h.sin() * v.x + h.cos() * v.y);
        let d = goal - p;
        let g = spec.slice(&obs, "goal_vector").unwrap();
        if d.norm() > 0.25 {
            let e = rot(d) * (1.0 / d.norm());
            assert!((g[0] - e.x).abs() < 1e-12 && (g[1] - e.y).abs() < 1e-12);
        }
        assert!((spec.slice(&obs, "goal_distance").unwrap()[0] - d.norm() / 14.0).abs() < 1e-15);
        let sub = spec.slice(&obs, "subgoals").unwrap();
        for k in 0..5 {
            let e = rot(sg.directions[k]);
            assert!((sub[2 * k] - e.x).abs() < 1e-12 && (sub[2 * k + 1] - e.y).abs() < 1e-12);
        }
        assert!(obs[..1200].iter().all(|v| *v == 0.7));
    }
}

fn transition<'a>(prev: &'a RobotState, next: &'a RobotState, min_range: f64, status: Status) -> Transition<'a> {
    Transition {
        prev,
        next,
        command: next.prev_command,
        min_range,
        status,
        goal: Vec2::new(8.0, 8.0),
        goal_radius: 0.25,
    }
}

#[test]
fn laser_term_matches_hand_computation() {
    let mut rng = SeededRng::new(17);
    let w = RewardWeights::default();
    let s = state(Vec2::new(2.0, 2.0), 0.0);
    for _ in 0..20 {
        let scan: Vec<f64> = (0..1200).map(|_| rng.uniform(0.002, 1.0)).collect();
        let mut m = f64::INFINITY;
        for v in &scan {
            if *v < m {
                m = *v;
            }
        }
        let min_m = m * 30.0;
        assert_eq!(min_scan_range(&scan, 30.0), min_m);
        let r = compute_reward(&transition(&s, &s, min_m, Status::Running), &w, ProgressReference::GoalDistance, None).unwrap();
        let expected = if min_m < 0.30 { -(0.30 - min_m) } else { 0.0 };
        assert!((r.laser - expected).abs() < 1e-15, "{} vs {expected}", r.laser);
    }
}

#[test]
fn path_lookahead_equals_goal_distance_on_a_straight_path() {
    let w = RewardWeights::default();
    let path = PlannedPath::from_waypoints(vec![Vec2::new(0.0, 8.0), Vec2::new(8.0, 8.0)]);
    for dx in [0.0, 0.05, 0.1, 0.3] {
        let prev = state(Vec2::new(2.0, 8.0), 0.0);
        let next = state(Vec2::new(2.0 + dx, 8.0), 0.0);
        let t = transition(&prev, &next, 5.0, Status::Running);
        let a = compute_reward(&t, &w, ProgressReference::GoalDistance, None).unwrap();
        let b = compute_reward(&t, &w, ProgressReference::PathLookahead, Some(&path)).unwrap();
        assert!((a.progress - dx).abs() < 1e-12);
        assert!((a.progress - b.progress).abs() < 1e-12);
    }
    let s = state(Vec2::new(1.0, 1.0), 0.0);
    let t = transition(&s, &s, 5.0, Status::Running);
    assert_eq!(
        compute_reward(&t, &w, ProgressReference::PathLookahead, None),
        Err(TaskError::MissingPath)
    );
}

#[test]
fn terminal_bonuses() {
    let w = RewardWeights::default();
    let s = state(Vec2::new(8.0, 8.1), 0.0);
    let r = |st| compute_reward(&transition(&s, &s, 5.0, st), &w, ProgressReference::GoalDistance, None).unwrap();
    assert_eq!(r(Status::Success).done, 10.0);
    assert_eq!(r(Status::Collision).done, -10.0);
    assert_eq!(r(Status::Timeout).done, 0.0);
    // 0.1 m from the goal with radius 0.25
    assert!((r(Status::Running).goal - 0.1 * (1.0 - 0.1 / 0.25)).abs() < 1e-12);
}

fn status_of(k: u8) -> Status {
    [Status::Running, Status::Success, Status::Collision, Status::Timeout][k as usize]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn reward_terms_sum_and_signs(
        p0 in prop::array::uniform2(0.0f64..10.0),
        step in prop::array::uniform2(-0.3f64..0.3),
        h in -3.2f64..3.2,
        cmd in prop::array::uniform3(-2.0f64..2.0),
        prev_cmd in prop::array::uniform3(-2.0f64..2.0),
        min_range in 0.0f64..2.0,
        status in 0u8..4,
        goal in prop::array::uniform2(0.0f64..10.0),
    ) {
        let w = RewardWeights::default();
        let mut prev = state(Vec2::new(p0[0], p0[1]), h);
        prev.prev_command = Action::from_array(prev_cmd);
        let mut next = state(Vec2::new(p0[0] + step[0], p0[1] + step[1]), h);
        next.prev_command = Action::from_array(cmd);
        let goal = Vec2::new(goal[0], goal[1]);
        let t = Transition { prev: &prev, next: &next, command: next.prev_command, min_range, status: status_of(status), goal, goal_radius: 0.25 };
        let r = compute_reward(&t, &w, ProgressReference::GoalDistance, None).unwrap();
        let [a, b, c, d, e] = r.terms();
        prop_assert_eq!(r.total, a + b + c + d + e);
        // progress has the sign of the approach
        let approach = prev.pose.position.distance(goal) - next.pose.position.distance(goal);
        prop_assert!(r.progress * approach >= 0.0);
        prop_assert!(r.laser <= 0.0);
        prop_assert!((r.laser == 0.0) == (min_range >= w.laser_threshold));
        prop_assert!(r.goal >= 0.0 && r.goal <= w.w_goal);
        prop_assert!((r.goal > 0.0) == (next.pose.position.distance(goal) < 0.25));
        prop_assert!(r.action <= 0.0);
        prop_assert!((r.action + w.w_action * Action::from_array(cmd).l1(Action::from_array(prev_cmd))).abs() < 1e-12);
        match status_of(status) {
            Status::Success => prop_assert!(r.done > 0.0),
            Status::Collision => prop_assert!(r.done < 0.0),
            _ => prop_assert_eq!(r.done, 0.0),
        }
    }
}
