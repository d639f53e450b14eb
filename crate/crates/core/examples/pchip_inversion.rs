//! Fits a monotone curve through a handful of samples, inverts it at equally
//! spaced ordinates and bounds each answer.

use senseaug::curve::{bracket_uncertainty, pchip_fit, Knot, DEFAULT_INVERT_TOL};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // a saturating curve with a plateau in the middle
    let knots = [
        Knot::new(0.0, 0.0),
        Knot::new(0.15, 0.55),
        Knot::new(0.4, 0.9),
        Knot::new(0.55, 0.9),
        Knot::new(0.8, 1.6),
        Knot::new(1.0, 2.0),
    ];
    let curve = pchip_fit(&knots)?;
    println!("slopes: {:.3?}", curve.slopes());

    for i in 0..=10 {
        let x = i as f64 / 10.0;
        println!("g({x:.1}) = {:.4}", curve.eval(x)?);
    }

    for target in [0.4, 0.8, 1.2, 1.6] {
        let x = curve.invert(target, DEFAULT_INVERT_TOL)?;
        match bracket_uncertainty(&knots, x, target, DEFAULT_INVERT_TOL) {
            Ok(b) => println!(
                "g^-1({target}) = {x:.4}, plausible range [{:.4}, {:.4}], half width {:.4}",
                b.x_lower, b.x_upper, b.half_width
            ),
            Err(e) => println!("g^-1({target}) = {x:.4} ({e})"),
        }
    }
    // the flat stretch maps 0.9 to its left end
    println!("g^-1(0.9) = {:.4}", curve.invert(0.9, DEFAULT_INVERT_TOL)?);
    Ok(())
}
