use std::time::Instant;

use braidhom::morse::morse_complex;
use braidhom::torus::{matching_t2, matching_t3, stream_validate_t3};

#[test]
fn profile() {
    for m in [8, 9, 10] {
        let t0 = Instant::now();
        let (c, matching) = matching_t2(m).unwrap();
        let t1 = Instant::now();
        let mc = morse_complex(&c, &matching).unwrap();
        let t2 = Instant::now();
        println!(
            "t2 m={m}: build {:?} ({} cells), morse {:?} ({} cells)",
            t1 - t0,
            c.len(),
            t2 - t1,
            mc.len()
        );
    }
    for k in [4, 5] {
        let t0 = Instant::now();
        let (c, matching) = matching_t3(k).unwrap();
        let t1 = Instant::now();
        braidhom::morse::validate_matching(&c, &matching).unwrap();
        let t2 = Instant::now();
        println!("t3 k={k}: build {:?} ({} cells), validate {:?}", t1 - t0, c.len(), t2 - t1);
    }
    for k in [6, 7, 8, 9] {
        let t0 = Instant::now();
        let out = stream_validate_t3(k).unwrap();
        println!("t3 stream k={k}: {:?} ({} cells, {} arrows)", t0.elapsed(), out.cells, out.arrows);
    }
}
