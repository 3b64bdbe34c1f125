//! A configuration-driven run writing profiles, fields and a manifest.

use qidd::cli::{self, parse_config};

fn main() {
    let out = std::env::temp_dir().join("qidd-example-run");
    let text = format!(
        r#"{{
            "scenario": "laue",
            "crystal": {{ "material": "si111", "D_over_Delta_H": 10, "lambda": 4.43, "theta_B": 44.9 }},
            "sim": {{ "layers": 500 }},
            "io": {{ "out": {:?}, "field_stride": 4 }}
        }}"#,
        out.display().to_string()
    );
    let config = parse_config(&text).unwrap();
    let report = cli::run(&config).unwrap();
    let m = &report.manifest;
    println!("wrote {}", report.out_dir.display());
    for file in &m.outputs {
        println!("  {} ({} bytes)", file.path, file.bytes);
    }
    print!("{}", cli::format_checks(&m.checks));
    println!("content hash {}", m.content_hash);
}
