use std::time::Instant;

use braidhom::cube::resolve;
use braidhom::torus::t3_word;

#[test]
fn resolve_share() {
    let w = t3_word(9);
    let m = w.len();
    let t0 = Instant::now();
    let mut sink = 0usize;
    for u in 0..1usize << m {
        let bits: Vec<bool> = (0..m).map(|i| u >> i & 1 == 1).collect();
        let su = resolve(&w, &bits).unwrap();
        sink += su.origins.len();
        for r in 0..m {
            if u >> r & 1 == 1 {
                continue;
            }
            let mut vb = bits.clone();
            vb[r] = true;
            let sv = resolve(&w, &vb).unwrap();
            sink += sv.origins.len();
        }
    }
    println!("resolve pass: {:?} (sink {sink})", t0.elapsed());
}
