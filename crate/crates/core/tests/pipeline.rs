use mtht::image::{Image, Shape};
use mtht::measures::{
    combine_multiscale, enhance, enhance_measures, scale_tensor, MeasureKind, MeasureParams, ZERO_TOLERANCE,
};
use mtht::morphology::{make_orientations_2d, make_orientations_3d, ScaleSet};
use mtht::synth::{generate, PhantomSpec};
use mtht::tensor::eigenvalues;
use proptest::prelude::*;

fn small_phantom_2d(seed: u64) -> Image {
    let spec = PhantomSpec {
        dims: Shape::new_2d(80, 72).unwrap(),
        n_branches: 4,
        ..PhantomSpec::default_2d(seed)
    };
    generate(&spec).unwrap().image
}

fn max_abs_diff(a: &Image, b: &Image) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn neuriteness_ignores_intensity_scaling() {
    let img = small_phantom_2d(4);
    let params = MeasureParams::default_2d(MeasureKind::Neuriteness);
    let base = enhance(&img, &params).unwrap().response;
    for k in [1e-3, 0.5, 7.0, 250.0] {
        let scaled = enhance(&img.map(|v| v * k).unwrap(), &params).unwrap().response;
        assert!(max_abs_diff(&base, &scaled) <= 1e-12, "k = {k}");
    }
}

#[test]
fn neuriteness_ignores_intensity_scaling_3d() {
    let spec = PhantomSpec {
        dims: Shape::new_3d(28, 24, 20).unwrap(),
        ..PhantomSpec::default_3d(2, 9)
    };
    let img = generate(&spec).unwrap().image;
    let mut params = MeasureParams::default_3d(MeasureKind::Neuriteness);
    params.n_orientations = 13;
    let base = enhance(&img, &params).unwrap().response;
    let scaled = enhance(&img.map(|v| v * 3.3).unwrap(), &params).unwrap().response;
    assert!(max_abs_diff(&base, &scaled) <= 1e-12);
}

/// Shape factors computed straight from eigenvalues, independent of the measure code.
fn blob_factors(img: &Image, scale: f64, beta: f64) -> Vec<f64> {
    let eig = eigenvalues(&scale_tensor(img, scale, &make_orientations_2d(12).unwrap()).unwrap()).unwrap();
    eig.iter()
        .map(|l| {
            let (small, large) = if l[0].abs() <= l[1].abs() { (l[0], l[1]) } else { (l[1], l[0]) };
            if large.abs() <= ZERO_TOLERANCE {
                0.0
            } else {
                let r = small / large;
                (-r * r / (2.0 * beta * beta)).exp()
            }
        })
        .collect()
}

#[test]
fn vesselness_shape_factor_ignores_contrast() {
    let img = small_phantom_2d(6);
    for scale in [3.0, 7.0] {
        let base = blob_factors(&img, scale, 0.5);
        let scaled = blob_factors(&img.map(|v| v * 5.5).unwrap(), scale, 0.5);
        for (a, b) in base.iter().zip(&scaled) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn adaptive_vesselness_ignores_contrast_and_fixed_c_does_not() {
    let img = small_phantom_2d(7);
    let adaptive = MeasureParams::default_2d(MeasureKind::Vesselness);
    let base = enhance(&img, &adaptive).unwrap();
    let scaled = enhance(&img.map(|v| v * 4.0).unwrap(), &adaptive).unwrap();
    assert!(max_abs_diff(&base.response, &scaled.response) <= 1e-12);
    for (c, c4) in base.effective_c.iter().zip(&scaled.effective_c) {
        assert!((c4 - 4.0 * c).abs() <= 1e-9 * c4);
    }

    let fixed = MeasureParams {
        c: Some(base.effective_c[0]),
        ..adaptive
    };
    let a = enhance(&img, &fixed).unwrap().response;
    let b = enhance(&img.map(|v| v * 4.0).unwrap(), &fixed).unwrap().response;
    assert!(max_abs_diff(&a, &b) > 1e-3);
}

#[test]
fn adding_a_scale_never_lowers_the_combined_response() {
    let img = small_phantom_2d(8);
    let mut params = MeasureParams::default_2d(MeasureKind::Vesselness);
    params.scales = ScaleSet::new(vec![3.0, 5.0, 7.0, 9.0, 11.0]).unwrap();
    let per_scale = enhance_measures(&img, &params, &[MeasureKind::Vesselness, MeasureKind::Neuriteness], true)
        .unwrap()
        .into_iter()
        .map(|r| r.per_scale.unwrap());
    for images in per_scale {
        let mut previous = combine_multiscale(&images[..1]).unwrap();
        for n in 2..=images.len() {
            let combined = combine_multiscale(&images[..n]).unwrap();
            assert!(combined.data().iter().zip(previous.data()).all(|(c, p)| c >= p));
            previous = combined;
        }
    }
}

#[test]
fn results_do_not_depend_on_the_thread_count() {
    let img = small_phantom_2d(10);
    let params = MeasureParams::default_2d(MeasureKind::Vesselness);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| enhance(&img, &params).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
}

#[test]
fn bright_line_stands_out_from_background() {
    let shape = Shape::new_2d(64, 64).unwrap();
    let mut data = vec![10.0; shape.len()];
    let mut on_line = vec![false; shape.len()];
    for x in 4..60 {
        // A shallow diagonal line, two pixels thick.
        let y = 20 + x / 3;
        for dy in 0..2 {
            let i = shape.index(x, y + dy, 0);
            data[i] = 90.0;
            on_line[i] = true;
        }
    }
    let img = Image::new(shape, data).unwrap();
    let response = enhance(&img, &MeasureParams::default_2d(MeasureKind::Vesselness)).unwrap().response;
    let mean = |want: bool| {
        let values: Vec<f64> = response
            .data()
            .iter()
            .zip(&on_line)
            .filter(|(_, &l)| l == want)
            .map(|(v, _)| *v)
            .collect();
        values.iter().sum::<f64>() / values.len() as f64
    };
    let (line, background) = (mean(true), mean(false));
    assert!(line >= 5.0 * background, "line {line} background {background}");
}

#[test]
fn enhancement_is_bounded_and_blank_input_gives_zero() {
    let img = small_phantom_2d(12);
    for kind in [MeasureKind::Vesselness, MeasureKind::Neuriteness] {
        let r = enhance(&img, &MeasureParams::default_2d(kind)).unwrap().response;
        assert_eq!(r.shape(), img.shape());
        assert!(r.data().iter().all(|v| (0.0..=1.0).contains(v)));
        let flat = Image::filled(img.shape(), 42.0);
        let blank = enhance(&flat, &MeasureParams::default_2d(kind)).unwrap().response;
        assert!(blank.data().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn hemisphere_lattice_of_one_hundred_is_well_spread() {
    let set = make_orientations_3d(100).unwrap();
    let v = set.as_slice();
    let mut min = f64::MAX;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            min = min.min(v[i].line_angle(&v[j]));
        }
    }
    // The lattice reaches about 10.4 degrees.
    assert!(min.to_degrees() > 10.0, "{}", min.to_degrees());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn every_orientation_is_a_unit_vector(n in 1usize..200) {
        for o in make_orientations_3d(n).unwrap().iter() {
            let norm: f64 = o.components().iter().map(|c| c * c).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() <= 1e-12);
        }
    }
}
