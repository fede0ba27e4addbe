//! Writing and reading the two on-disk formats, and a held-out split.
//!
//!     cargo run --release --example datasets

use kldro::data::{gen_imbalanced, load_dataset, parse_dataset, write_dataset, DataFormat};

fn main() -> kldro::Result<()> {
    let dir = std::env::temp_dir().join("kldro-datasets-example");
    std::fs::create_dir_all(&dir)?;
    let data = gen_imbalanced(90, 10, 5, 2.0, 0.05, 3)?;

    for (name, format) in [
        ("d.csv", DataFormat::DenseCsv),
        ("d.svm", DataFormat::LibSvm),
    ] {
        let path = dir.join(name);
        write_dataset(&data, &path, format)?;
        let back = load_dataset(&path, DataFormat::from_path(&path))?;
        println!(
            "{name}: n = {}, d = {}, labels {:?}, identical: {}",
            back.n(),
            back.d(),
            back.label_counts(),
            back == data
        );
    }

    let sparse = parse_dataset("+1 1:0.5 3:2.0\n-1 2:1.0\n", DataFormat::LibSvm, Some(3))?;
    println!("sparse rows: {:?} {:?}", sparse.row(0), sparse.row(1));

    let (train, test) = data.split(0.25, 0)?;
    println!("split: {} train, {} held out", train.n(), test.n());
    match parse_dataset("1,0.5\n-3,0.2\n", DataFormat::DenseCsv, None) {
        Ok(_) => println!("unexpected success"),
        Err(e) => println!("bad label rejected: {e}"),
    }
    Ok(())
}
