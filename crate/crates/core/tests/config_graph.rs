use corpusforge::components::builtin_registry;
use corpusforge::config_graph::{
    build_graph, parse_config, resolve_roots, validate_document, Level,
};
use corpusforge::planner::ModelShape;

const PLAN: &str = r#"
shape:
  interface: model_shape
  variant: transformer_block
  config: {hidden: 4096, ffn_hidden: 14336, query_heads: 32, kv_heads: 8, head_dim: 128, layers: 32}
net:
  interface: collective_model
  variant: alpha_beta
  config: {alpha: 1.0e-5, bandwidth: 1.0e10}
plan:
  interface: planner
  variant: fsdp
  config:
    shape: !ref shape
    collective: !ref net
    dp_degrees: [8]
"#;

#[test]
fn builtin_planner_config_resolves() {
    let reg = builtin_registry();
    let validation = validate_document(PLAN, &reg, &[], Some("plan"));
    assert!(validation.is_valid(), "{:?}", validation.diagnostics);
    let graph = validation.graph.unwrap();
    assert_eq!(graph.topological_order().last().unwrap(), "plan");
    let objects = resolve_roots(&graph, &reg, &["shape"]).unwrap();
    assert_eq!(
        *objects.get::<ModelShape>("shape").unwrap(),
        ModelShape::LLAMA3_8B
    );
    assert_eq!(objects.instantiation_order(), ["shape"]);
}

#[test]
fn overrides_are_typed_by_the_declared_param() {
    let reg = builtin_registry();
    let overrides = vec!["net.config.alpha=3".to_string()];
    let validation = validate_document(PLAN, &reg, &overrides, None);
    assert!(validation.is_valid(), "{:?}", validation.diagnostics);
    let overrides = vec!["net.config.alpha=fast".to_string()];
    let validation = validate_document(PLAN, &reg, &overrides, None);
    assert!(!validation.is_valid());
    let line = validation.diagnostics[0].to_string();
    assert!(line.starts_with("ERROR "), "{line}");
    assert!(line.contains("'fast' is not a float"), "{line}");
}

#[test]
fn yaml_int_for_float_param_is_a_type_error() {
    let reg = builtin_registry();
    let doc = PLAN.replace("alpha: 1.0e-5", "alpha: 3");
    let validation = validate_document(&doc, &reg, &[], None);
    assert_eq!(
        validation.diagnostics[0].to_string(),
        "ERROR net: param 'alpha' expects float, found int"
    );
}

#[test]
fn unknown_and_dangling_params() {
    let reg = builtin_registry();
    let doc = PLAN
        .replace("dp_degrees: [8]", "dp_degrees: [8]\n    colour: blue")
        .replace("!ref net", "!ref nowhere");
    let validation = validate_document(&doc, &reg, &[], None);
    let lines: Vec<String> = validation
        .diagnostics
        .iter()
        .map(|d| d.to_string())
        .collect();
    assert!(
        lines.contains(&"ERROR plan: unknown param 'colour'".to_string()),
        "{lines:?}"
    );
    assert!(
        lines.contains(
            &"ERROR plan: param 'collective' references undefined node 'nowhere'".to_string()
        ),
        "{lines:?}"
    );
}

#[test]
fn unused_nodes_warn_relative_to_root() {
    let reg = builtin_registry();
    let graph = build_graph(parse_config(PLAN).unwrap(), &reg).unwrap();
    let warnings = graph.unused_node_warnings(&["net"]);
    assert_eq!(warnings.len(), 2);
    assert!(warnings.iter().all(|w| w.level == Level::Warn));
}

#[test]
fn syntax_errors_are_reported() {
    let validation = validate_document("a: [unclosed", &builtin_registry(), &[], None);
    assert!(!validation.is_valid());
    assert_eq!(validation.diagnostics[0].level, Level::Error);
}
