mod common;

use bonsai_core::gaussian::{init_gaussians, Palette};
use bonsai_core::io;
use bonsai_core::model::SizingParams;
use bonsai_core::rng;
use bonsai_core::solid::{build_mesh, compute_sizes, sample_surface};
use bonsai_core::Error;

#[test]
fn mesh_and_cloud_round_trips() {
    let skel = common::random_skeleton(&mut common::rng(1), 25);
    let sp = SizingParams { r_e: 0.01, i_g: 2.0, ring_segments: 5 };
    let mesh = build_mesh(&compute_sizes(&skel, &sp).unwrap(), &sp).unwrap();

    let obj: io::ObjMesh<f64> = io::parse_obj(&io::mesh_to_obj(&mesh)).unwrap();
    assert_eq!(obj.faces, mesh.faces);
    for (a, b) in obj.vertices.iter().zip(&mesh.vertices) {
        assert!(a.distance(*b) < 1e-8);
    }

    let cloud = sample_surface(&mesh, 3000.0, &mut rng::stream(1, rng::SAMPLING)).unwrap();
    let back = io::parse_cloud_ply::<f64>(&io::cloud_to_ply(&cloud)).unwrap();
    assert_eq!(back.labels, cloud.labels);
    assert_eq!(back.points.len(), cloud.points.len());

    let g = init_gaussians(&cloud, 0.7, &Palette::default()).unwrap();
    let text = io::gaussians_to_ply(&g);
    assert!(text.starts_with("ply\nformat ascii 1.0\nelement vertex"));
    let gb = io::parse_gaussians_ply::<f64>(&text).unwrap();
    assert_eq!(gb.len(), g.len());
    for (a, b) in gb.splats.iter().zip(&g.splats) {
        assert!((a.sigma() - b.sigma()).abs() <= 1e-8 * b.sigma());
    }
}

#[test]
fn masks_load_from_png_and_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let mask = bonsai_core::fit::Mask::from_gray(3, 2, &[0, 200, 128, 127, 255, 10]);
    let pgm = dir.path().join("m.pgm");
    io::write_file(&pgm, &io::mask_to_pgm(&mask)).unwrap();
    assert_eq!(io::load_mask(&pgm).unwrap(), mask);

    let png = dir.path().join("m.png");
    image::GrayImage::from_raw(3, 2, vec![0, 200, 128, 127, 255, 10]).unwrap().save(&png).unwrap();
    assert_eq!(io::load_mask(&png).unwrap(), mask);

    let junk = dir.path().join("junk.png");
    io::write_file(&junk, b"not an image").unwrap();
    assert!(matches!(io::load_mask(&junk), Err(Error::Parse(_))));
    assert!(io::load_mask(&dir.path().join("missing.png")).unwrap_err().is_io());
}
