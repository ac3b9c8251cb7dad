use lwn::approx::*;
fn main() {
    let grid = sample_grid(0.0, std::f64::consts::PI, 1000, f64::sin);
    let cfg = FitConfig::for_interval(0.0, std::f64::consts::PI);
    for k in [5, 10, 20, 30, 40] {
        let fit = fit_1d(&grid, k, &cfg);
        println!("K={k:3} terms={} hidden={} sup={:.6}", fit.terms.len(), fit.hidden_neurons(), fit.sup_error(&grid));
    }
}
