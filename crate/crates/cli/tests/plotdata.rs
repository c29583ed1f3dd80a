use relulab::{gd_run, witness, GdConfig, ParamVec, Problem, TargetSpec};
use relulab_cli::plotdata::PLOT_HEADER;
use relulab_cli::{emit_plotdata, CliError};

fn problem() -> Problem<f64> {
    Problem::uniform(TargetSpec::new(vec![0.0, 0.5, 1.0], vec![-1.0, 1.0], 0.5).unwrap(), 2).unwrap()
}

fn start(p: &Problem<f64>) -> ParamVec<f64> {
    let mut theta = witness(p).unwrap();
    theta.set_c(theta.c() + 0.3);
    theta.set_w(1, 1.2);
    theta
}

fn parse(csv: &str) -> Vec<Vec<f64>> {
    csv.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn three_rows_give_three_lines_and_a_header() {
    let p = problem();
    let rec = gd_run(&p, &start(&p), &GdConfig::new(0.1, 0.0, 2)).unwrap();
    assert_eq!(rec.rows.len(), 3);
    let mut buf = Vec::new();
    emit_plotdata(&rec, 0.0, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(text.lines().next().unwrap(), PLOT_HEADER);
}

#[test]
fn constant_schedule_clock_is_n() {
    let p = problem();
    let rec = gd_run(&p, &start(&p), &GdConfig::new(0.1, 0.0, 40)).unwrap();
    let mut buf = Vec::new();
    emit_plotdata(&rec, 0.0, &mut buf).unwrap();
    for row in parse(&String::from_utf8(buf).unwrap()) {
        assert_eq!(row[1], row[0]);
    }
}

#[test]
fn risk_column_round_trips_bit_exactly() {
    let p = problem();
    for rho in [0.0, 0.5] {
        let rec = gd_run(&p, &start(&p), &GdConfig::new(0.05, rho, 500)).unwrap();
        let mut buf = Vec::new();
        emit_plotdata(&rec, rho, &mut buf).unwrap();
        let rows = parse(&String::from_utf8(buf).unwrap());
        assert_eq!(rows.len(), rec.rows.len());
        for (row, r) in rows.iter().zip(&rec.rows) {
            assert_eq!(row[2].to_bits(), r.risk.to_bits());
            assert_eq!(row[3].to_bits(), r.risk.ln().to_bits());
            assert_eq!(row[1].to_bits(), (r.n as f64).powf(1.0 - rho).to_bits());
        }
    }
}

#[test]
fn empty_record_is_an_error() {
    let p = problem();
    let mut rec = gd_run(&p, &start(&p), &GdConfig::new(0.1, 0.0, 2)).unwrap();
    rec.rows.clear();
    assert!(matches!(emit_plotdata(&rec, 0.0, Vec::new()), Err(CliError::EmptyRecord)));
}
