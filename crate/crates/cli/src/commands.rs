use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use roadlabel_core::annotation::{
    accuracy_vs_votes, aggregate_labels, build_tasks, diminishing_returns_point, parse_votes,
    simulate_votes, vote_stats, AnnotatorModel, Ballot, Curve, Segment, VoteStore,
};
use roadlabel_core::compositor::{
    assign_pixels, decode_label_map, encode_label_map, read_stack, FmssLabeling, Palette,
};
use roadlabel_core::roadgraph::{
    cluster_interchanges, parse_road_graph, partition_vertices, RoadGraph, RoadType,
};
use roadlabel_core::synth::random_road_graph;
use roadlabel_core::taxonomy::{
    class_iou_with, evaluation_palette, load_taxonomy, remap_label_map, road_scene_palette,
    AbsentPolicy, ClassTaxonomy, RemapTable,
};
use roadlabel_core::viewplan::{select_viewpoints, PlanConfig, ViewPlan};
use roadlabel_core::world::{coverage_of_plan, generate_world, SyntheticWorld, VisibilityParams};
use serde::Serialize;

use crate::config::{FileConfig, PipelineConfig};
use crate::error::CliError;
use crate::{Cli, Command, Output};

pub fn run(cli: Cli) -> Result<(), (bool, CliError)> {
    let json = cli.json;
    execute(cli).map_err(|e| (json, e))
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn emit(output: &Output, bytes: &[u8]) -> Result<(), CliError> {
    match &output.out {
        Some(path) => fs::write(path, bytes).map_err(|e| CliError::io(path, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(|e| CliError::new("io", e.to_string()))
        }
    }
}

fn emit_json<T: Serialize>(output: &Output, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(output, text.as_bytes())
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn required(
    flag: Option<PathBuf>,
    fallback: &Option<PathBuf>,
    name: &str,
) -> Result<PathBuf, CliError> {
    flag.or_else(|| fallback.clone()).ok_or_else(|| {
        CliError::new(
            "usage",
            format!("--{name} is required (or set `{name}` in the config file)"),
        )
    })
}

fn load_graph(path: &Path) -> Result<RoadGraph, CliError> {
    Ok(parse_road_graph(read(path)?.as_slice())?)
}

fn load_palette(path: Option<&Path>, default: Palette) -> Result<Palette, CliError> {
    match path {
        Some(p) => Ok(Palette::from_csv(read(p)?.as_slice())?),
        None => Ok(default),
    }
}

fn load_ballots(path: &Path) -> Result<Vec<Ballot>, CliError> {
    Ok(serde_json::from_slice(&read(path)?)?)
}

fn taxonomy(cfg: &PipelineConfig, flag: Option<PathBuf>) -> Result<ClassTaxonomy, CliError> {
    match flag.or_else(|| cfg.taxonomy.clone()) {
        Some(p) => Ok(load_taxonomy(read(&p)?.as_slice())?),
        None => Ok(ClassTaxonomy::road_scene()),
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut cfg = PipelineConfig::from_file(&file);
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }

    match cli.command {
        Command::GenGraph { vertices, output } => {
            if vertices == 0 {
                return Err(CliError::new(
                    "invalid_value",
                    "--vertices must be at least 1",
                ));
            }
            emit(
                &output,
                with_newline(random_road_graph(vertices, cfg.seed).to_json()).as_bytes(),
            )
        }
        Command::Plan {
            graph,
            d_min,
            road_types,
            eps,
            min_pts,
            output,
        } => {
            cfg.d_min = d_min.unwrap_or(cfg.d_min);
            cfg.eps = eps.unwrap_or(cfg.eps);
            cfg.min_pts = min_pts.unwrap_or(cfg.min_pts);
            cfg.validate()?;
            let types = road_types
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<RoadType>()
                        .map_err(|e| CliError::new("invalid_value", e))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let g = load_graph(&required(graph, &cfg.graph, "graph")?)?;
            let part = partition_vertices(&g);
            let clustering = cluster_interchanges(&g, &part, cfg.eps, cfg.min_pts);
            let plan_cfg = PlanConfig::with_road_types(cfg.d_min, types)?;
            let plan = select_viewpoints(&g, &part, &clustering.clusters, &plan_cfg)?;
            emit(&output, with_newline(plan.to_json()).as_bytes())
        }
        Command::Coverage {
            graph,
            plan,
            world,
            d_max,
            fov,
            output,
        } => {
            cfg.d_max = d_max.unwrap_or(cfg.d_max);
            cfg.fov = fov.unwrap_or(cfg.fov);
            cfg.validate()?;
            let g = load_graph(&required(graph, &cfg.graph, "graph")?)?;
            let w = SyntheticWorld::from_json(&read_text(&required(world, &cfg.world, "world")?)?)?;
            let plan = ViewPlan::from_json(&read_text(&plan)?, &g)?;
            let vp = VisibilityParams::new(cfg.d_max, cfg.fov)?;
            emit_json(&output, &coverage_of_plan(&plan, &g, &w, &vp))
        }
        Command::GenWorld {
            graph,
            density,
            output,
        } => {
            let g = load_graph(&required(graph, &cfg.graph, "graph")?)?;
            let w = generate_world(&g, density, cfg.seed)?;
            emit(&output, with_newline(w.to_json()).as_bytes())
        }
        Command::Composite {
            stack,
            labeling,
            palette,
            output,
        } => {
            let stack = read_stack(read(&stack)?.as_slice())?;
            let labeling: FmssLabeling = serde_json::from_slice(&read(&labeling)?)?;
            let palette = load_palette(palette.as_deref(), road_scene_palette())?;
            let map = assign_pixels(&stack, &labeling);
            emit(&output, &encode_label_map(&map, &palette)?)
        }
        Command::Remap {
            input,
            table,
            src_palette,
            dst_palette,
            output,
        } => {
            let table = match table.or_else(|| cfg.remap.clone()) {
                Some(p) => RemapTable::from_csv(read(&p)?.as_slice())?,
                None => RemapTable::road_scene_to_evaluation(),
            };
            let src = load_palette(src_palette.as_deref(), road_scene_palette())?;
            let dst = load_palette(dst_palette.as_deref(), evaluation_palette())?;
            let map = decode_label_map(&read(&input)?, &src)?;
            let out = remap_label_map(&map, &table)?;
            emit(&output, &encode_label_map(&out, &dst)?)
        }
        Command::Iou {
            pred,
            gt,
            taxonomy: tax,
            palette,
            count_absent,
            output,
        } => {
            let t = taxonomy(&cfg, tax)?;
            let palette = load_palette(palette.as_deref(), road_scene_palette())?;
            let pred = decode_label_map(&read(&pred)?, &palette)?;
            let gt = decode_label_map(&read(&gt)?, &palette)?;
            let policy = if count_absent {
                AbsentPolicy::CountAsZero
            } else {
                AbsentPolicy::Exclude
            };
            let report = class_iou_with(&pred, &gt, &t, policy)?;
            emit(&output, with_newline(report.to_json()).as_bytes())
        }
        Command::Tasks { segments, output } => {
            let segments: Vec<Segment> = serde_json::from_slice(&read(&segments)?)?;
            emit_json(&output, &build_tasks(&segments))
        }
        Command::Serve {
            port,
            data_dir,
            quota,
            lease_minutes,
        } => {
            cfg.validate()?;
            let config = roadlabel_service::ServiceConfig {
                quota: quota.unwrap_or(cfg.k),
                lease_minutes,
            };
            let rt =
                tokio::runtime::Runtime::new().map_err(|e| CliError::new("io", e.to_string()))?;
            rt.block_on(roadlabel_service::serve(port, &data_dir, config))?;
            Ok(())
        }
        Command::SimulateVotes {
            gold,
            p,
            classes,
            k,
            output,
        } => {
            cfg.p = p.unwrap_or(cfg.p);
            cfg.k = k.unwrap_or(cfg.k);
            cfg.validate()?;
            let classes = match classes {
                Some(c) => c,
                None => taxonomy(&cfg, None)?.len() as u32,
            };
            let gold: FmssLabeling = serde_json::from_slice(&read(&gold)?)?;
            let model = AnnotatorModel::new(cfg.p, classes, cfg.seed)?;
            emit_json(&output, &simulate_votes(&gold, &model, cfg.k)?)
        }
        Command::Aggregate {
            votes,
            ballots,
            output,
        } => {
            let ballots = match (votes, ballots) {
                (_, Some(path)) => load_ballots(&path)?,
                (Some(path), None) => {
                    let mut store = VoteStore::in_memory(taxonomy(&cfg, None)?.len());
                    for vote in parse_votes(read(&path)?.as_slice())? {
                        store.record(vote)?;
                    }
                    store.ballots()
                }
                (None, None) => {
                    return Err(CliError::new("usage", "--votes or --ballots is required"))
                }
            };
            emit_json(&output, &aggregate_labels(&ballots))
        }
        Command::Curve {
            ballots,
            k_max,
            target,
            output,
        } => {
            cfg.target = target.unwrap_or(cfg.target);
            cfg.validate()?;
            let bytes = read(&ballots)?;
            let curve = if bytes.trim_ascii_start().starts_with(b"[") {
                let ballots: Vec<Ballot> = serde_json::from_slice(&bytes)?;
                accuracy_vs_votes(&ballots, k_max.unwrap_or(cfg.k))?
            } else {
                Curve::from_csv(bytes.as_slice())?
            };
            let k_star = diminishing_returns_point(&curve, cfg.target);
            let line = match k_star {
                Some(k) => format!("k*={k}\n"),
                None => "k*=none\n".to_string(),
            };
            match &output.out {
                Some(_) => {
                    emit(&output, curve.to_csv().as_bytes())?;
                    emit(&Output::default(), line.as_bytes())
                }
                None => emit(
                    &output,
                    format!("{}{line}", with_newline(curve.to_csv())).as_bytes(),
                ),
            }
        }
        Command::Stats {
            ballots,
            threshold,
            output,
        } => emit_json(&output, &vote_stats(&load_ballots(&ballots)?, threshold)),
    }
}
