use potentia::balayage::sweep;
use potentia::{make_measure, EnergyContext, KernelSpec, Point, Region};

#[test]
fn readme_example() -> potentia::Result<()> {
    let kernel = KernelSpec::newtonian(3, 0.05)?;
    let ctx = EnergyContext::new(kernel);
    let region = Region::new(potentia::grids::fibonacci_sphere(500, 1.0, [0.0; 3])?, "sphere")?;
    let mu = make_measure(vec![Point::new(vec![3.0, 0.0, 0.0])?], vec![1.0])?;
    let result = sweep(&ctx, &mu, &region, 1e-9)?;
    // A unit atom at distance 3 from the unit sphere sweeps to mass about 1/3.
    assert!((result.swept_mass - 1.0 / 3.0).abs() < 0.02, "{}", result.swept_mass);
    Ok(())
}
