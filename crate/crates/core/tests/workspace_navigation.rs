use std::f64::consts::PI;

use ballchain::navigation::{
    autopilot_script, run_script, ChannelScene, Command, NavigationSession, SessionSettings,
};
use ballchain::workspace::{
    find_self_intersection, half_disk, planar_area, revolved_volume, scan, scan_designs,
    ScanSettings,
};
use ballchain::{design_from_table, BallChainDesign, DesignKind};

fn coarse() -> ScanSettings {
    ScanSettings {
        angles_deg: (0..=12).map(|k| 15.0 * f64::from(k)).collect(),
        lengths_mm: (1..=10).map(f64::from).collect(),
        parallel: false,
        ..ScanSettings::default()
    }
}

#[test]
fn half_disk_area_and_volume() {
    let disk = half_disk(20.0, 1.0);
    let area = planar_area(&disk).unwrap();
    assert!((area - PI * 400.0 / 2.0).abs() < 0.5, "{area}");
    assert!((area - 628.3).abs() < 0.5);
    let v = revolved_volume(&disk).unwrap();
    let ball = 4.0 / 3.0 * PI * 20f64.powi(3);
    assert!((v / ball - 1.0).abs() < 0.005, "{v} vs {ball}");
}

#[test]
fn washer_and_trivial_polygons() {
    let (a, y1, y2) = (3.0, 1.0, 2.5);
    let rect = [[0.0, y1], [a, y1], [a, y2], [0.0, y2]];
    let v = revolved_volume(&rect).unwrap();
    assert!((v - PI * a * (y2 * y2 - y1 * y1)).abs() < 1e-9);
    let square = [[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]];
    assert!((planar_area(&square).unwrap() - 100.0).abs() < 1e-12);
    assert_eq!(planar_area(&[[1.0, 2.0]]).unwrap(), 0.0);
    assert_eq!(revolved_volume(&[[1.0, 0.0], [2.0, 0.0]]).unwrap(), 0.0);
    assert!(revolved_volume(&[[0.0, -1.0], [1.0, 1.0], [0.0, 1.0]]).is_err());
}

#[test]
fn ball_chain_scan_structure() {
    let design = design_from_table(DesignKind::BallChain);
    let ws = scan(&design, &coarse()).unwrap();
    assert!(ws.converged.iter().flatten().all(|c| *c));
    // boundary A: the aligned field keeps every length straight
    let d_mm = 0.9;
    for (tip, l) in ws.tips_mm[0].iter().zip(&ws.lengths_mm) {
        let n = (l / d_mm).round().max(1.0);
        assert!((tip[0] - (n - 1.0) * d_mm).abs() < 1e-9);
        assert!(tip[1].abs() < 1e-6);
    }
    assert!(ws.boundary_a.iter().all(|p| p[1].abs() < 1e-6));
    assert!(find_self_intersection(&ws.polygon()).is_none());
    let bound = PI * 10f64.powi(2) / 2.0;
    assert!(ws.area_mm2 > 0.0 && ws.area_mm2 <= bound);
    // the field sweep turns the longest chain monotonically
    let longest = ws.lengths_mm.len() - 1;
    let polar: Vec<f64> = ws
        .tips_mm
        .iter()
        .map(|row| row[longest][1].atan2(row[longest][0]))
        .collect();
    assert!(polar.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{polar:?}");
}

#[test]
fn parallel_scan_equals_serial_scan() {
    let designs = [
        design_from_table(DesignKind::BallChain),
        design_from_table(DesignKind::TipMagnet),
    ];
    let serial = scan_designs(&designs, &coarse()).unwrap();
    let parallel = scan_designs(
        &designs,
        &ScanSettings {
            parallel: true,
            ..coarse()
        },
    )
    .unwrap();
    assert_eq!(serial, parallel);
}

#[test]
fn single_angle_scan_is_degenerate() {
    let settings = ScanSettings {
        angles_deg: vec![0.0],
        ..coarse()
    };
    let ws = scan(&design_from_table(DesignKind::BallChain), &settings).unwrap();
    assert_eq!(ws.area_mm2, 0.0);
    assert!(ws.warnings.iter().any(|w| w.contains("degenerate")));
}

fn session(scene: &str) -> NavigationSession {
    NavigationSession::new(
        ChannelScene::builtin(scene).unwrap(),
        BallChainDesign::experimental(),
        SessionSettings::default(),
    )
    .unwrap()
}

#[test]
fn aligned_field_runs_straight_past_the_junction() {
    let mut s = session("turn90");
    let half = 0.5 * 3.175;
    while s.last().tip_mm[0] < 8.0 {
        let e = s.step(Command::Advance { length_mm: half }).unwrap();
        assert!(e.converged && !e.jammed);
        assert!(e.max_penetration_mm < 0.05 * 1.5875);
    }
    assert_eq!(s.last().tip_region.as_deref(), Some("straight"));
    assert!(s.last().positions_mm.iter().all(|p| p[1].abs() < 1e-6));
}

#[test]
fn autopilot_turns_into_the_branch() {
    let script = autopilot_script(90).unwrap();
    let out = run_script(&script).unwrap();
    assert_eq!(out.reached_target, Some(true));
    let last = out.session.last();
    assert_eq!(last.tip_region.as_deref(), Some("branch"));
    assert!(out.max_penetration_mm() < 0.05 * 1.5875);
    // inserted length only grows under advance commands
    let lengths: Vec<f64> = out
        .session
        .log()
        .iter()
        .map(|e| e.inserted_length_mm)
        .collect();
    assert!(lengths.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn navigation_logs_are_reproducible() {
    let script = autopilot_script(135).unwrap();
    let a = run_script(&script).unwrap().session.log_jsonl();
    let b = run_script(&script).unwrap().session.log_jsonl();
    assert_eq!(a, b);
}

#[test]
fn retraction_and_step_limits() {
    let mut s = session("turn120");
    for _ in 0..4 {
        s.step(Command::Advance { length_mm: 3.175 }).unwrap();
    }
    assert_eq!(s.last().balls, 5);
    s.step(Command::Retract { length_mm: 3.175 }).unwrap();
    assert_eq!(s.last().balls, 4);
    assert!(s.step(Command::Advance { length_mm: 3.3 }).is_err());
    assert!(s.step(Command::Advance { length_mm: -1.0 }).is_err());
    // a rejected command leaves the log untouched
    assert_eq!(s.log().len(), 6);
}
