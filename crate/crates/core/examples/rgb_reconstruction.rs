//! Renders a phantom through the CIE 1931 observer and compares the
//! colour of the two classes with their spectral difference.

use hsi_ssl::rgbrecon::{hsi_to_rgb, CmfTable};
use hsi_ssl::synth::{make_phantom, PhantomSpec};

fn class_mean<const N: usize>(values: impl Iterator<Item = [f64; N]>) -> [f64; N] {
    let mut sum = [0.0; N];
    let mut n = 0.0;
    for v in values {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
        n += 1.0;
    }
    sum.map(|s| s / n)
}

fn main() -> hsi_ssl::Result<()> {
    let spec = PhantomSpec::two_class(48, 48, 351, 3);
    let (cube, gt) = make_phantom(&spec)?;
    let rgb = hsi_to_rgb(&cube, &CmfTable::cie1931())?;
    rgb.save_ppm("phantom_rgb.ppm")?;

    for class in [0u8, 1] {
        let px = (0..gt.len()).filter(|&p| gt.get(p) == class);
        let mean = class_mean(px.map(|p| rgb.pixels[p]));
        println!("class {class}: sRGB ({:.4}, {:.4}, {:.4})", mean[0], mean[1], mean[2]);
    }
    let s = &spec.class_spectra;
    let (i750, i590) = ((750.0 - 450.0) as usize, (590.0 - 450.0) as usize);
    println!(
        "spectral gap at 750 nm {:.4}, at 590 nm {:.4}",
        s[0][i750] - s[1][i750],
        s[0][i590] - s[1][i590]
    );
    println!("wrote phantom_rgb.ppm");
    Ok(())
}
