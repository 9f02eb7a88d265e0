//! Fixtures shared by the criterion benches.

use dpd_core::imaging::{
    add_gaussian_noise, add_salt_pepper, blur, build_gaussian_problem, build_saltpepper_problem, make_phantom,
    GaussianDeblurSpec, SaltPepperDeblurSpec,
};
use dpd_core::linops::{make_average_kernel, make_motion_kernel};
use dpd_core::SaddleProblem;

/// Gaussian-noise deblurring instance on a `size × size` phantom.
pub fn gaussian_problem(size: usize) -> SaddleProblem {
    let truth = make_phantom(size, size).expect("phantom");
    let kernel = make_motion_kernel(7, 135.0).expect("kernel");
    let observed = add_gaussian_noise(&blur(&truth, &kernel).expect("blur"), 3e-3, 1).expect("noise");
    build_gaussian_problem(&GaussianDeblurSpec {
        observed,
        kernel,
        mu: 3000.0,
        mu_g: 0.01,
    })
    .expect("problem")
}

/// Salt-and-pepper deblurring instance on a `size × size` phantom.
pub fn salt_pepper_problem(size: usize) -> SaddleProblem {
    let truth = make_phantom(size, size).expect("phantom");
    let kernel = make_average_kernel(5).expect("kernel");
    let observed = add_salt_pepper(&blur(&truth, &kernel).expect("blur"), 0.2, 1).expect("noise");
    build_saltpepper_problem(&SaltPepperDeblurSpec {
        observed,
        kernel,
        alpha: 4.0,
        mu_g0: 0.03,
        halve_every: 10,
    })
    .expect("problem")
}
