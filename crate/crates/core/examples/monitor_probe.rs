fn main() {
    let t0 = std::time::Instant::now();
    let (outcome, reports) = ringfl::verify::check_monitor_bounds();
    for (label, r) in &reports {
        println!("{label}: lhs={} stated={} dscaled={} opposed={} hyp={} statedok={} ok={}",
            r.lhs_mean_grad_norm, r.rhs_stated, r.rhs_d_scaled, r.max_opposed_fraction,
            r.hypothesis_holds, r.stated_bound_holds, r.asserted_ok());
    }
    println!("monitor passed={} detail={}", outcome.passed, outcome.detail);
    println!("elapsed {:?}", t0.elapsed());
    let t1 = std::time::Instant::now();
    let det = ringfl::verify::check_determinism();
    println!("determinism passed={} ({:?})", det.passed, t1.elapsed());
}
