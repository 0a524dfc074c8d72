use std::collections::BTreeSet;

use cmc_core::codegen::{emit_formula, emit_model_json, emit_script, parse_model_json, CodegenConfig};
use cmc_core::data::{profile_reader, reconcile};
use cmc_core::derivation::{assemble_model, statistical_questions, Family, FamilyLink, Link, StatisticalChoices, StatisticalModel};
use cmc_core::disambiguation::{apply_resolution, enumerate_ambiguities, refinement_complete, Resolution};
use cmc_core::dsl::{compile_source, parse_program, pretty_print};
use cmc_core::graph::{build_graph, DEFAULT_MAX_CYCLE_NODES};
use cmc_testkit::{expand_formula, r_smoke_check, random_refinement_program};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NAMES: &[&str] = &["age", "sex", "race", "income", "edu", "job", "x_1", "Y"];

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(NAMES).prop_map(str::to_string)
}

fn string_lit() -> impl Strategy<Value = String> {
    "[a-z \"\\\\]{0,6}".prop_map(|s| {
        let escaped: String = s.chars().flat_map(|c| match c {
            '"' => vec!['\\', '"'],
            '\\' => vec!['\\', '\\'],
            c => vec![c],
        }).collect();
        format!("\"{escaped}\"")
    })
}

fn value() -> impl Strategy<Value = String> {
    prop_oneof![string_lit(), (-50i32..50).prop_map(|n| n.to_string()), (0u32..100).prop_map(|n| format!("{n}.5"))]
}

fn comparison() -> impl Strategy<Value = String> {
    (ident(), prop_oneof![
        Just("increases".to_string()),
        Just("decreases".to_string()),
        value().prop_map(|v| format!("== {v}")),
        value().prop_map(|v| format!("!= {v}")),
    ])
        .prop_map(|(v, op)| format!("{v} {op}"))
}

fn statement() -> impl Strategy<Value = String> {
    prop_oneof![
        (ident(), prop::option::of(string_lit()), prop::option::of(1u32..99), any::<bool>()).prop_map(|(n, id, c, p)| {
            let kw = if p { "participant" } else { "unit" };
            let id = id.map(|s| format!(" {s}")).unwrap_or_default();
            let c = c.map(|c| format!(" cardinality = {c}")).unwrap_or_default();
            format!("{kw} {n}{id}{c}")
        }),
        (ident(), ident(), 0..4usize, prop::collection::vec(string_lit(), 1..4), any::<bool>(), prop::option::of(1u32..9))
            .prop_map(|(n, owner, k, levels, ordered, c)| {
                let ty = match k {
                    0 => "continuous".to_string(),
                    1 => "counts".to_string(),
                    2 | 3 => format!(
                        "{}[{}]{}",
                        if k == 2 { "categories" } else { "condition" },
                        levels.join(", "),
                        if ordered { " ordered" } else { "" }
                    ),
                    _ => unreachable!(),
                };
                let c = c.map(|c| format!(", cardinality = {c}")).unwrap_or_default();
                format!("measure {n} = {ty}({owner}{c})")
            }),
        (any::<bool>(), any::<bool>(), ident(), ident(), prop::option::of(comparison()), prop::option::of(comparison()))
            .prop_map(|(assume, causes, a, b, w, t)| {
                let w = w.map(|w| format!(", when = {w}")).unwrap_or_default();
                let t = t.map(|t| format!(", then = {t}")).unwrap_or_default();
                format!(
                    "{} {}({a}, {b}{w}{t})",
                    if assume { "assume" } else { "hypothesize" },
                    if causes { "causes" } else { "relates" }
                )
            }),
        prop::collection::vec(ident(), 2..4).prop_map(|v| format!("interacts({})", v.join(", "))),
        (ident(), ident()).prop_map(|(a, b)| format!("query ace({a} -> {b})")),
    ]
}

/// Statements joined with irregular whitespace and comments. Repeated
/// declarations of a name are dropped so the text always parses.
fn program_text() -> impl Strategy<Value = String> {
    prop::collection::vec((statement(), prop::sample::select(vec!["\n", "\n\n", "  # note\n", " \t\n"])), 0..10)
        .prop_map(|items| {
            let mut declared = BTreeSet::new();
            let mut out = String::new();
            for (s, sep) in items {
                let mut words = s.split_whitespace();
                let keyword = words.next().unwrap_or_default();
                if matches!(keyword, "unit" | "participant" | "measure") && !declared.insert(words.next().unwrap_or_default().to_string()) {
                    continue;
                }
                out.push_str(&s);
                out.push_str(sep);
            }
            out
        })
}

fn model_strategy() -> impl Strategy<Value = StatisticalModel> {
    let vars: Vec<String> = ["A", "B", "C", "D", "E", "F"].iter().map(|s| s.to_string()).collect();
    (prop::sample::subsequence(vars.clone(), 0..=6), prop::collection::vec(prop::sample::subsequence(vars, 2..=3), 0..3))
        .prop_map(|(covariates, groups)| {
            let mut interactions: Vec<Vec<String>> = groups.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
            interactions.sort();
            let mut cov: BTreeSet<String> = covariates.into_iter().collect();
            cov.extend(interactions.iter().flatten().cloned());
            cov.remove("X");
            StatisticalModel {
                dv: "Y".into(),
                iv: "X".into(),
                covariates: cov.into_iter().collect(),
                interactions,
                family_link: FamilyLink::new(Family::Gaussian, Link::Identity),
                data_path: None,
                warnings: vec![],
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pretty_print_round_trips(src in program_text()) {
        let ast = parse_program(&src).unwrap();
        let printed = pretty_print(&ast);
        let reparsed = parse_program(&printed).unwrap();
        prop_assert_eq!(reparsed.without_spans(), ast.without_spans());
        prop_assert_eq!(pretty_print(&reparsed), printed);
    }

    #[test]
    fn parsing_never_panics(src in "\\PC{0,200}") {
        let _ = parse_program(&src);
        let _ = compile_source(&src);
    }

    #[test]
    fn parsing_token_soup_never_panics(
        words in prop::collection::vec(prop::sample::select(vec![
            "unit", "measure", "=", "(", ")", "[", "]", ",", "causes", "relates", "assume", "query", "ace", "->",
            "\"s", "\"ok\"", "x", "y", "12", "-3.5", "==", "!=", "#c\n", "\n", "cardinality", "ordered", "interacts",
        ]), 0..60)
    ) {
        let _ = compile_source(&words.join(" "));
    }

    #[test]
    fn diagnostics_carry_positions(src in program_text()) {
        if let Err(diags) = compile_source(&src) {
            for d in diags {
                prop_assert!(d.span.line >= 1 && d.span.col >= 1);
                prop_assert!(d.span.start <= src.len());
            }
        }
    }

    #[test]
    fn formula_terms_match_model_terms(m in model_strategy()) {
        let (dv, terms) = expand_formula(&emit_formula(&m));
        prop_assert_eq!(dv, m.dv.clone());
        prop_assert_eq!(terms, m.terms());
    }

    #[test]
    fn model_json_round_trips(m in model_strategy()) {
        prop_assert_eq!(parse_model_json(&emit_model_json(&m)).unwrap(), m);
    }

    #[test]
    fn scripts_are_deterministic(m in model_strategy()) {
        let cfg = CodegenConfig { data_path: Some("d.csv".into()), ..Default::default() };
        prop_assert_eq!(emit_script(&m, &cfg).unwrap(), emit_script(&m.clone(), &cfg.clone()).unwrap());
    }

    #[test]
    fn scripts_pass_the_r_smoke_check(m in model_strategy(), pick in 0usize..7, quoted in any::<bool>()) {
        let family = [
            Family::Gaussian, Family::InverseGaussian, Family::Gamma, Family::Poisson,
            Family::NegativeBinomial, Family::Binomial, Family::Multinomial,
        ][pick];
        let mut m = m;
        m.family_link = FamilyLink::new(family, family.canonical_link());
        if quoted {
            m.dv = "_odd name".into();
        }
        let cfg = CodegenConfig {
            data_path: Some("dir/\"quoted\".csv".into()),
            assumptions: vec!["assume a causes b when a == \"x\"".into()],
            notes: vec!["a note".into()],
            ..Default::default()
        };
        let script = emit_script(&m, &cfg).unwrap();
        prop_assert!(r_smoke_check(&script).is_ok(), "{:?}\n{}", r_smoke_check(&script), script);
    }

    #[test]
    fn reconcile_is_idempotent(
        cells in prop::collection::vec((prop::sample::select(vec!["a", "b", "c", "d", ""]), 0u32..20, -1.0f64..30.0), 1..30)
    ) {
        let src = "unit p\nmeasure c = categories[\"a\", \"b\", \"c\"](p)\nmeasure n = counts(p)\n\
                   measure x = continuous(p)\nassume causes(c, x)\nquery ace(c -> x)";
        let (cm, _) = compile_source(src).unwrap();
        let mut csv = String::from("c,n,x\n");
        for (c, n, x) in &cells {
            csv.push_str(&format!("{c},{n},{x}\n"));
        }
        let profiles = profile_reader(csv.as_bytes()).unwrap();
        let once = reconcile(&cm, &profiles).unwrap();
        let twice = reconcile(&once.model, &profiles).unwrap();
        prop_assert_eq!(twice.model, once.model);
    }

    #[test]
    fn analysts_can_only_shrink_the_model(seed in any::<u64>(), keep_mask in any::<u32>(), ix_mask in any::<u32>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (src, _) = random_refinement_program(&mut rng, 6);
        let (cm, q) = compile_source(&src).unwrap();
        let mut g = build_graph(&cm);
        while let Some(a) = enumerate_ambiguities(&g, DEFAULT_MAX_CYCLE_NODES).unwrap().first().cloned() {
            g = apply_resolution(&g, &Resolution::new(a.id, 0), DEFAULT_MAX_CYCLE_NODES).unwrap().0;
        }
        let questions = statistical_questions(&g, &cm, &q).unwrap();
        let all = assemble_model(&g, &cm, &q, &StatisticalChoices::keep_all(Family::Gaussian, Link::Identity)).unwrap();
        let covariates: Vec<String> =
            questions.adjustment.set.iter().enumerate().filter(|(i, _)| keep_mask & (1 << i) != 0).map(|(_, c)| c.clone()).collect();
        let interactions: Vec<Vec<String>> =
            questions.interactions.iter().enumerate().filter(|(i, _)| ix_mask & (1 << i) != 0).map(|(_, c)| c.clone()).collect();
        let choices = StatisticalChoices {
            covariates: Some(covariates),
            interactions: Some(interactions),
            ..StatisticalChoices::keep_all(Family::Gaussian, Link::Identity)
        };
        let some = assemble_model(&g, &cm, &q, &choices).unwrap();
        prop_assert!(some.terms().is_subset(&all.terms()));
    }
}

#[test]
fn refinement_terminates_with_a_dag_inside_the_original() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..200 {
        let n = 3 + (rand::Rng::gen_range(&mut rng, 0..5));
        let (src, _) = random_refinement_program(&mut rng, n);
        let (cm, _) = compile_source(&src).unwrap_or_else(|d| panic!("{src}\n{d:?}"));
        let original = build_graph(&cm);
        let before: BTreeSet<(String, String)> = original.edges().iter().map(|e| (e.from.clone(), e.to.clone())).collect();
        let mut g = original.clone();
        let mut steps = 0;
        while let Some(a) = enumerate_ambiguities(&g, DEFAULT_MAX_CYCLE_NODES).unwrap().first().cloned() {
            g = apply_resolution(&g, &Resolution::new(a.id, 0), DEFAULT_MAX_CYCLE_NODES).unwrap().0;
            steps += 1;
            assert!(steps <= before.len(), "no progress on\n{src}");
        }
        assert!(refinement_complete(&g));
        assert!(g.is_acyclic());
        for e in g.edges() {
            assert!(before.contains(&(e.from.clone(), e.to.clone())));
        }
    }
}

#[test]
fn graph_building_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let (src, _) = random_refinement_program(&mut rng, 6);
        let (cm, _) = compile_source(&src).unwrap();
        assert_eq!(build_graph(&cm), build_graph(&cm));
        assert_eq!(build_graph(&cm).to_json(), build_graph(&compile_source(&src).unwrap().0).to_json());
    }
}
