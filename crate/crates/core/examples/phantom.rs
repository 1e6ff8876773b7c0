//! Generates a noisy two-class phantom and writes it to disk.
//!
//! cargo run --example phantom -- [output dir]

use hsi_ssl::cube_io::{load_cube, save_cube, save_label_map};
use hsi_ssl::synth::{make_phantom, PhantomSpec};

fn main() -> hsi_ssl::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "phantom_out".into());
    std::fs::create_dir_all(&dir).map_err(|e| hsi_ssl::Error::io(&dir, e))?;

    let mut spec = PhantomSpec::two_class(64, 64, 32, 7);
    spec.noise_sigma = 0.05;
    spec.gain_jitter = 0.1;
    let (cube, gt) = make_phantom(&spec)?;

    let cube_path = format!("{dir}/phantom.hscube");
    save_cube(&cube, &cube_path)?;
    save_label_map(&gt, format!("{dir}/phantom_gt.pgm"))?;

    let back = load_cube(&cube_path)?;
    assert_eq!(back, cube);

    let tumour = gt.labels().iter().filter(|&&l| l == 1).count();
    println!(
        "{}x{}x{} cube, {:.0}-{:.0} nm, {tumour} of {} pixels in class 1",
        cube.rows(),
        cube.cols(),
        cube.bands(),
        cube.wavelengths()[0],
        cube.wavelengths()[cube.bands() - 1],
        gt.len()
    );
    println!("written to {dir}/");
    Ok(())
}
