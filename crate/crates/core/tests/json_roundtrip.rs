use lipcert::benchgen::BenchSpec;
use lipcert::benchgen::{CnnModel, X2Variant, XyVariant};
use lipcert::netmodel::{load, load_path, save, save_path, LayerSpec, Padding, Shape};
use lipcert::Error;

fn all_generators() -> Vec<BenchSpec> {
    vec![
        BenchSpec::X2 { depth: 4, variant: X2Variant::Symmetric },
        BenchSpec::X2 { depth: 3, variant: X2Variant::Asymmetric },
        BenchSpec::Xy { terms: 2, variant: XyVariant::HatA },
        BenchSpec::Xy { terms: 1, variant: XyVariant::HatB },
        BenchSpec::Random { dims: vec![8, 10, 6, 3], seed: 7 },
        BenchSpec::Cnn { model: CnnModel::A, seed: 0 },
        BenchSpec::Cnn { model: CnnModel::B, seed: 1 },
        BenchSpec::Cnn { model: CnnModel::C, seed: 2 },
    ]
}

#[test]
fn generators_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    for spec in all_generators() {
        let net = spec.build().unwrap();
        let text = save(&net);
        let back = load(text.as_bytes()).unwrap();
        assert_eq!(back, net, "{}", net.name());
        assert_eq!(save(&back), text);

        let path = dir.path().join(format!("{}.json", net.name()));
        save_path(&net, &path).unwrap();
        assert_eq!(load_path(&path).unwrap(), net);
    }
}

#[test]
fn exporter_style_document() {
    // Layout written by the Python exporter: kernels as [out][in][kh][kw],
    // pools as [h, w] pairs, optional conv stride and padding.
    let doc = br#"{
      "name": "tiny",
      "input_shape": [4, 4, 1],
      "layers": [
        {"kind": "conv2d", "kernel": [[[[1, 0], [0, -1]]], [[[0.5, 0.5], [0.5, 0.5]]]], "bias": [0, 0.25], "padding": "same"},
        {"kind": "activation", "fn": "relu"},
        {"kind": "maxpool2d", "pool": [2, 2], "stride": [2, 2]},
        {"kind": "avgpool2d", "pool": [2, 1], "stride": [1, 1]},
        {"kind": "dense", "weight": [[1, -1, 1, -1]], "bias": [0]},
        {"kind": "activation", "fn": "identity"}
      ]
    }"#;
    let net = load(doc).unwrap();
    assert_eq!(net.name(), "tiny");
    assert_eq!(net.shapes()[2], Shape::Image { h: 4, w: 4, c: 2 });
    assert_eq!(net.shapes()[3], Shape::Image { h: 2, w: 2, c: 2 });
    assert_eq!(net.output_dim(), 1);
    let LayerSpec::Conv2d(c) = &net.layers()[0] else { panic!("expected a conv layer") };
    assert_eq!((c.kernel.get(0, 0, 1, 1), c.kernel.get(1, 0, 0, 1)), (-1.0, 0.5));
    assert_eq!((c.stride, c.padding), ((1, 1), Padding::Same));
    assert_eq!(load(save(&net).as_bytes()).unwrap(), net);
}

#[test]
fn minimal_document_defaults_name() {
    let net = load(br#"{"input_shape":[2],"layers":[{"kind":"dense","weight":[[1,2]],"bias":[0]}]}"#).unwrap();
    assert_eq!(net.name(), "net");
    assert_eq!(net.forward(&[3.0, 4.0]).unwrap(), vec![11.0]);
}

#[test]
fn malformed_documents() {
    let unknown = br#"{"input_shape":[2],"layers":[{"kind":"softmax"}]}"#;
    assert_eq!(load(unknown).unwrap_err(), Error::UnknownLayerKind("softmax".into()));

    let bias = br#"{"input_shape":[2],"layers":[{"kind":"dense","weight":[[1,2]],"bias":[0,0]}]}"#;
    assert!(matches!(load(bias), Err(Error::ShapeMismatch(_))));

    let cols = br#"{"input_shape":[3],"layers":[{"kind":"dense","weight":[[1,2]],"bias":[0]}]}"#;
    assert!(matches!(load(cols), Err(Error::ShapeMismatch(_))));

    let ragged = br#"{"input_shape":[5,5,1],"layers":[{"kind":"maxpool2d","pool":[2,2],"stride":[2,2]}]}"#;
    assert!(matches!(load(ragged), Err(Error::ShapeMismatch(_))));

    for bad in [&b"not json"[..], br#"[1,2]"#, br#"{"layers":[]}"#, br#"{"input_shape":[2,2],"layers":[]}"#] {
        assert!(matches!(load(bad), Err(Error::Parse(_))), "{}", String::from_utf8_lossy(bad));
    }
    assert!(matches!(load_path("/nonexistent/net.json"), Err(Error::Io(_))));
}
