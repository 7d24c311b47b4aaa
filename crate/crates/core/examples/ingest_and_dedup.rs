//! Read an event table with declared units and epoch timestamps, remove
//! near-duplicate detections, and write the cleaned events back out.
//!
//! ```bash
//! cargo run --example ingest_and_dedup
//! ```

use std::io::Write;

use st_hawkes::io::{deduplicate, read_events, retained_indices, write_events, DistanceUnit, EventFileSpec, TimeOrigin, TimeUnit};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("st-hawkes-ingest-example");
    std::fs::create_dir_all(&dir)?;
    let raw = dir.join("detections.tsv");

    // Easting/northing in meters, Unix seconds. Rows two and four repeat
    // earlier detections 20 m and 30 s apart.
    let mut f = std::fs::File::create(&raw)?;
    let rows = [
        "easting\tnorthing\tunix_time",
        "325100\t4306200\t1262304000",
        "325120\t4306200\t1262304030",
        "326400\t4307950\t1262390400",
        "326410\t4307930\t1262390430",
        "325900\t4305000\t1262649600",
    ];
    writeln!(f, "{}", rows.join("\n"))?;

    let spec = EventFileSpec {
        delimiter: '\t',
        x_column: "easting".into(),
        y_column: "northing".into(),
        t_column: "unix_time".into(),
        distance_unit: DistanceUnit::M,
        time_unit: TimeUnit::S,
        time_origin: TimeOrigin::Epoch,
        ..EventFileSpec::default()
    };
    let file = read_events(&raw, &spec)?;
    println!(
        "read {} events; time zero is epoch day {:.0}",
        file.events.len(),
        file.time_offset_days
    );
    for e in file.events.iter() {
        println!("  x = {:.3} km, y = {:.3} km, t = {:.5} d", e.x[0], e.x[1], e.t);
    }

    // Within 50 m and 2 minutes of an earlier kept event.
    let (radius_km, window_days) = (0.05, 2.0 / 1440.0);
    let kept = retained_indices(&file.events, radius_km, window_days)?;
    let clean = deduplicate(&file.events, radius_km, window_days)?;
    println!("kept rows {kept:?}: {} of {} events", clean.len(), file.events.len());

    let out = dir.join("clean.csv");
    write_events(&out, &clean, None)?;
    println!("wrote {}", out.display());
    Ok(())
}
