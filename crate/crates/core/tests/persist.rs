use manip_learn::config::Scenario;
use manip_learn::device::DeviceKind;
use manip_learn::features::PatchSpec;
use manip_learn::persist::{read_dataset, read_model, read_pca, read_session, write_dataset, write_model, write_pca, write_session};
use manip_learn::trainer::Trainer;

#[test]
fn session_and_parts_round_trip() {
    let mut trainer = Trainer::new(Scenario::standard(DeviceKind::Rocker), 0).unwrap();
    let session = trainer.initialize().unwrap();

    let mut buf = Vec::new();
    write_session(&mut buf, &session).unwrap();
    let back = read_session(buf.as_slice()).unwrap();
    assert_eq!(back.poses, session.poses);
    assert_eq!(back.seed_point, session.seed_point);
    for (a, b) in back.behaviors.iter().zip(&session.behaviors) {
        assert_eq!(a.model, b.model);
        assert_eq!(a.pca, b.pca);
        assert_eq!(a.data.counts(), b.data.counts());
        for (x, y) in a.data.examples.iter().zip(&b.data.examples) {
            assert_eq!(x.features.values, y.features.values);
            assert_eq!(x.features.point, y.features.point);
            assert_eq!(x.label, y.label);
        }
    }
    let mut again = Vec::new();
    write_session(&mut again, &back).unwrap();
    assert_eq!(again, buf);

    let st = &session.behaviors[0];
    let mut m = Vec::new();
    write_model(&mut m, &st.model).unwrap();
    assert_eq!(read_model(m.as_slice()).unwrap(), st.model);

    let mut p = Vec::new();
    write_pca(&mut p, &st.pca, &PatchSpec::default()).unwrap();
    let (pca, spec) = read_pca(p.as_slice()).unwrap();
    assert_eq!(pca, st.pca);
    assert_eq!(spec, PatchSpec::default());

    let mut d = Vec::new();
    write_dataset(&mut d, &st.data).unwrap();
    let data = read_dataset(d.as_slice()).unwrap();
    assert_eq!(data.tag, st.data.tag);
    assert_eq!(data.len(), st.data.len());
}

#[test]
fn truncated_or_foreign_files_are_rejected() {
    let mut trainer = Trainer::new(Scenario::standard(DeviceKind::WallSwitch), 0).unwrap();
    let session = trainer.initialize().unwrap();
    let mut buf = Vec::new();
    write_session(&mut buf, &session).unwrap();
    assert!(read_session(&buf[..buf.len() / 2]).is_err());
    assert!(read_model(buf.as_slice()).is_err());
    assert!(read_pca(&b"P6\n1 1\n255\n"[..]).is_err());
}
