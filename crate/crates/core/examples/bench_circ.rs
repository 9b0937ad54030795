use ringq::circuit::*;

fn main() {
    for nmax in [3usize, 4, 5] {
        let mut spec = CircuitSpec::fast_test_point();
        spec.n_max = nmax;
        let t0 = std::time::Instant::now();
        let s = circuit_spectrum(&spec, 3).unwrap();
        println!(
            "nmax={} dim={} f01={:.6} took {:?}",
            nmax,
            spec.dimension(),
            s.f01(),
            t0.elapsed()
        );
    }
}
