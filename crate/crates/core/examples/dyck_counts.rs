//! Exact lattice-path counts checked against brute-force enumeration.

use qidd::pathcomb::{
    bounded_peak_dyck, catalan, count_paths_to_node, count_paths_with_reflections, enumerate_paths, narayana,
    PathSpec,
};

fn main() {
    let n = 6;
    println!("paths through a {n}-layer slab by exit node p and reflection count k");
    let all = enumerate_paths(&PathSpec::new(n)).unwrap();
    for p in -(n as i64)..=n as i64 {
        let row: Vec<String> = (0..=2 * n).map(|k| count_paths_with_reflections(n, k, p).to_string()).collect();
        let seen = all.iter().filter(|w| w.end_offset() == p).count();
        println!("p = {p:>3}: total {:>4} (enumerated {seen:>4})  by k: {}", count_paths_to_node(n, p), row.join(" "));
    }

    println!("\nDyck paths of semi-length {n}: Catalan {}", catalan(n));
    for k in 1..=n {
        let bounded: Vec<String> = (1..=n).map(|h| bounded_peak_dyck(n, k, h).to_string()).collect();
        println!("k = {k} peaks: Narayana {:>3}, height-bounded h = 1..{n}: {}", narayana(n, k), bounded.join(" "));
    }
}
