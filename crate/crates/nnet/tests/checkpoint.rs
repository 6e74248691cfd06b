use threedpm_nnet::{checkpoint, Architecture, ModelParams, NnetError};

#[test]
fn file_round_trip_keeps_f32_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let arch = Architecture::standard(6);
    let p = ModelParams::<f32>::init(&arch.layout(), 4);
    checkpoint::save(&path, &arch, &p.values).unwrap();
    let (a, v) = checkpoint::load::<f32>(&path).unwrap();
    assert_eq!(a, arch);
    assert_eq!(v, p.values);
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..7], b"3DPMNET");
}

#[test]
fn wrong_length_and_truncation_are_rejected() {
    let arch = Architecture::standard(6);
    assert!(checkpoint::encode(&arch, &[0.0f32; 3]).is_err());
    let bytes = checkpoint::encode(&arch, &ModelParams::<f32>::zeros(&arch.layout()).values).unwrap();
    assert!(matches!(checkpoint::decode::<f32>(&bytes[..bytes.len() - 9]), Err(NnetError::Format(_))));
}
