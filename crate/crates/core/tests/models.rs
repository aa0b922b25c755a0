use pwdyn::bifurcation::{is_monotone, scan_curve, staircase, ScanOptions};
use pwdyn::models::{firing_number_scan, IfModel, PlanarRelayModel, RelayModel1D, RelaySweep, ScalarField};
use pwdyn::Rational;

fn if_base(amplitude: f64) -> IfModel {
    IfModel {
        field: ScalarField::affine(-0.5, 0.2),
        theta: 1.0,
        amplitude,
        duty: 0.5,
        period: 1.9,
    }
}

#[test]
fn relay_sweep_staircase_is_monotone() {
    let model = RelayModel1D {
        field: ScalarField::affine(-2.0, 0.0),
        k: -1.0,
        period: 0.5,
        y_star: 0.0,
    };
    let sweep = RelaySweep::new(model).unwrap();
    let records = scan_curve(&sweep, 300, &ScanOptions::default()).unwrap();
    let steps = staircase(&records);
    assert!(is_monotone(&steps));
    let etas: Vec<Rational> = steps.iter().filter_map(|s| s.eta).collect();
    assert!(etas.len() > 250);
    assert!(etas.first().unwrap() < etas.last().unwrap());
}

#[test]
fn firing_number_climbs_through_window() {
    let amps: Vec<f64> = (0..41).map(|i| 2.2 + i as f64 / 40.0).collect();
    let recs = firing_number_scan(&if_base(2.2), &amps, &ScanOptions::default());
    let etas: Vec<f64> = recs.iter().map(|r| r.eta.expect("locked").to_f64()).collect();
    assert!(etas.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(etas[0], 2.0);
    assert_eq!(*etas.last().unwrap(), 3.0);
    for r in &recs {
        assert!(r.contracting);
        assert_eq!(r.eta, r.spike_average);
    }
}

#[test]
fn closed_form_strobe_matches_integration() {
    for &a in &[0.8, 1.6, 2.7, 3.9] {
        let m = if_base(a);
        for i in 0..8 {
            let x0 = i as f64 / 8.0;
            let exact = m.strobe(x0).unwrap();
            let numeric = m.strobe_numeric(x0).unwrap();
            assert_eq!(exact.spikes, numeric.spikes, "A={a} x0={x0}");
            assert!((exact.x - numeric.x).abs() < 1e-6, "A={a} x0={x0}");
        }
    }
}

#[test]
fn planar_relay_orbits_are_maximin() {
    let base = PlanarRelayModel {
        a0: -2.0,
        a1: -5.0,
        b: 1.0,
        k: -1.0,
        period: 0.1,
        c1: 1.5,
        y_star: 0.1,
    };
    let map = base.planar_map().unwrap();
    let analysis = map.analyze();
    assert!(analysis.both_virtual);
    assert!(analysis.quasi_contraction_ok());
    assert!(!analysis.orbits.is_empty());
    for o in &analysis.orbits {
        assert!(o.is_maximin().unwrap());
        assert_eq!(o.word.eta_number(), o.eta);
    }
}
