//! Writes the fixture curves as JSON files into the directory given as the
//! first argument (default `curves`).

use hullscope_core::curve::fixtures;

fn main() -> std::io::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "curves".into());
    std::fs::create_dir_all(&dir)?;
    for (name, curve) in [
        ("circle", fixtures::circle()),
        ("graph", fixtures::parabola()),
        ("cubic", fixtures::cubic()),
        ("figure_eight", fixtures::figure_eight()),
        ("real_circle", fixtures::real_circle()),
        ("two_circles", fixtures::two_circles()),
    ] {
        let path = std::path::Path::new(&dir).join(format!("{name}.json"));
        std::fs::write(&path, curve.to_json_string() + "\n")?;
        println!("{}", path.display());
    }
    Ok(())
}
