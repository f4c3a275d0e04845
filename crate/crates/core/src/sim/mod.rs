//! Component port contract, graph validation and the fixed-step scheduler.

mod component;
mod graph;
mod port;
mod system;

pub use component::{Component, StepContext, StepError};
pub use graph::{validate_graph, Connection, GraphError, Schedule};
pub use port::{Direction, PortRef, PortSpec, Quantity};
pub use system::{step_count, Recorder, SignalBus, SimError, System, Trace};


#[cfg(test)]
mod tests {
    use super::testing::*;
    use super::*;

    fn pass(_: &StepContext, i: &[f64], o: &mut [f64]) {
        o.copy_from_slice(i);
    }

    fn source(ctx: &StepContext, _: &[f64], o: &mut [f64]) {
        o[0] = 3.0 + ctx.end_time();
    }

    #[test]
    fn single_component_schedules_alone() {
        let comps: Vec<Box<dyn Component>> = vec![Box::new(Probe::new("solo", &[], &["y"], source))];
        let s = validate_graph(&comps, &[], 0.01).unwrap();
        assert_eq!(s.order(), ["solo"]);
        assert_eq!(s.unit_delays(), 0);
    }

    #[test]
    fn chain_with_feedback_orders_forward() {
        let comps: Vec<Box<dyn Component>> = vec![
            Box::new(Probe::new("motor", &["v"], &["omega"], pass)),
            Box::new(Probe::new("inverter", &["m"], &["v"], pass)),
            Box::new(Probe::new("controller", &["omega"], &["m"], pass)),
        ];
        let conns = [conn("controller.m", "inverter.m"), conn("inverter.v", "motor.v"), fb("motor.omega", "controller.omega")];
        let s = validate_graph(&comps, &conns, 0.01).unwrap();
        assert_eq!(s.order(), ["controller", "inverter", "motor"]);
        assert_eq!(s.unit_delays(), 1);
    }

    #[test]
    fn mutual_feedthrough_is_algebraic_loop() {
        let comps: Vec<Box<dyn Component>> =
            vec![Box::new(Probe::new("a", &["x"], &["y"], pass)), Box::new(Probe::new("b", &["x"], &["y"], pass))];
        let err = validate_graph(&comps, &[conn("a.y", "b.x"), conn("b.y", "a.x")], 0.01).unwrap_err();
        match err {
            GraphError::AlgebraicLoop(cycle) => {
                assert_eq!(cycle.first(), cycle.last());
                assert!(cycle.contains(&"a".to_string()) && cycle.contains(&"b".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_feedthrough_input_breaks_ordering() {
        let mut b = Probe::new("b", &["x"], &["y"], pass);
        b.feedthrough = false;
        let comps: Vec<Box<dyn Component>> = vec![Box::new(Probe::new("a", &["x"], &["y"], pass)), Box::new(b)];
        let s = validate_graph(&comps, &[conn("a.y", "b.x"), conn("b.y", "a.x")], 0.01).unwrap();
        assert_eq!(s.order(), ["b", "a"]);
        assert_eq!(s.unit_delays(), 0);
    }

    #[test]
    fn contract_errors() {
        let comps: Vec<Box<dyn Component>> =
            vec![Box::new(Probe::new("a", &[], &["y"], source)), Box::new(Probe::new("b", &["x"], &["y"], pass))];
        assert!(matches!(validate_graph(&comps, &[], 0.01), Err(GraphError::UnconnectedInput(_))));
        assert!(matches!(validate_graph(&comps, &[conn("a.z", "b.x")], 0.01), Err(GraphError::UnknownPort(_))));
        assert!(matches!(validate_graph(&comps, &[conn("a.y", "b.x")], 0.0), Err(GraphError::InvalidDt(_))));
        assert!(matches!(validate_graph(&[], &[], 0.01), Err(GraphError::Empty)));

        let mut volt = Probe::new("c", &["x"], &["y"], pass);
        volt.inputs[0].quantity = Quantity::Voltage;
        let comps: Vec<Box<dyn Component>> = vec![Box::new(Probe::new("a", &[], &["y"], source)), Box::new(volt)];
        let err = validate_graph(&comps, &[conn("a.y", "c.x")], 0.01).unwrap_err();
        assert!(matches!(err, GraphError::QuantityMismatch { .. }), "{err}");
    }

    #[test]
    fn identity_chain_passes_source_values() {
        let comps: Vec<Box<dyn Component>> = vec![
            Box::new(Probe::new("p2", &["x"], &["y"], pass)),
            Box::new(Probe::new("src", &[], &["y"], source)),
            Box::new(Probe::new("p1", &["x"], &["y"], pass)),
        ];
        let mut sys = System::new(comps, &[conn("src.y", "p1.x"), conn("p1.y", "p2.x")], 0.5).unwrap();
        sys.step().unwrap();
        assert_eq!(sys.bus().get("p2.y"), sys.bus().get("src.y"));
        assert_eq!(sys.bus().get("src.y"), Some(3.5));
    }

    #[test]
    fn time_is_step_count_times_dt() {
        let comps: Vec<Box<dyn Component>> = vec![Box::new(Probe::new("src", &[], &["y"], source))];
        let mut sys = System::new(comps, &[], 0.01).unwrap();
        sys.step().unwrap();
        sys.step().unwrap();
        assert_eq!(sys.bus().time(), 2.0 * 0.01);
        assert_eq!(sys.bus().time(), 0.02);
    }

    #[test]
    fn nan_output_aborts_naming_component() {
        fn nan(_: &StepContext, _: &[f64], o: &mut [f64]) {
            o[0] = f64::NAN;
        }
        let comps: Vec<Box<dyn Component>> = vec![Box::new(Probe::new("plant", &[], &["y"], nan))];
        let mut sys = System::new(comps, &[], 0.01).unwrap();
        let err = sys.run(1.0).unwrap_err();
        assert_eq!(err, SimError::NonFinite { time: 0.0, component: "plant".into(), port: "y".into() });
    }

    #[test]
    fn run_row_counts() {
        let make = || {
            let comps: Vec<Box<dyn Component>> = vec![Box::new(Probe::new("src", &[], &["y"], source))];
            System::new(comps, &[], 0.1).unwrap()
        };
        assert_eq!(make().run(0.0).unwrap().len(), 0);
        let t = make().run(1.0).unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(t, make().run(1.0).unwrap());
        assert!(matches!(make().run(1.05), Err(SimError::InvalidDuration { .. })));
        assert!(matches!(make().run(-1.0), Err(SimError::InvalidDuration { .. })));
    }

    #[test]
    fn feedback_reads_previous_tick() {
        fn acc(_: &StepContext, i: &[f64], o: &mut [f64]) {
            o[0] = i[0] + 1.0;
        }
        let comps: Vec<Box<dyn Component>> = vec![Box::new(Probe::new("count", &["x"], &["y"], acc))];
        let mut sys = System::new(comps, &[fb("count.y", "count.x")], 0.1).unwrap();
        let t = sys.run(0.5).unwrap();
        assert_eq!(t.series("count.y").unwrap(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn trace_csv_round_trip() {
        let comps: Vec<Box<dyn Component>> = vec![Box::new(Probe::new("src", &[], &["y"], source))];
        let t = System::new(comps, &[], 0.1).unwrap().run(0.3).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_s,src.y\n0,0\n0.1,3.1\n"));
        assert_eq!(Trace::read_csv(&buf[..]).unwrap(), t);
    }
}
