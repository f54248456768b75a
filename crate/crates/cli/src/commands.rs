use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

use rappsurf::fit::{
    fit_extended_model, fit_param_map, FitReport, FormSpec, Param, RappFitOptions, SurfaceForm,
};
use rappsurf::grid::{parse_axis, Grid, GridMap};
use rappsurf::io::{load_campaign, save_campaign, synth_2534, ModelFile};
use rappsurf::metrics::{amam_overlay, compare_variants, export_heatmap, heatmap_from_csv, heatmap_to_csv, ModelVariant};
use rappsurf::select::{choose_initial_degree, eliminate, export_trace, trace_to_csv, StopReason};
use rappsurf::signal::{align_campaign, synth_campaign, Campaign, ImpairmentSpec, OfdmConfig};
use rappsurf::surface::{full_basis, Monomial};
use rappsurf::{OperatingPoint, RappParams};

use crate::output::{resolve, Outputs};
use crate::Command;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            truth,
            vsup,
            freq,
            noise_db,
            max_delay,
            no_phase,
            rms,
            seed,
            id,
            output,
        } => {
            let truth = match truth {
                Some(path) => ModelFile::load(&path)?,
                None => synth_2534(),
            };
            let grid = parse_grid(&vsup, &freq)?;
            let stimulus = OfdmConfig {
                target_rms: rms,
                seed,
                ..OfdmConfig::default()
            };
            let impairments = ImpairmentSpec {
                noise_db,
                max_delay,
                random_phase: !no_phase,
                seed,
            };
            let id = id.unwrap_or_else(|| truth.amplifier_id.clone());
            let campaign = synth_campaign(&id, &truth.model(), &grid, &stimulus, &impairments)?;
            let dir = resolve(&output, "campaign");
            save_campaign(&campaign, &dir, Some(&stimulus), output.force)
                .with_context(|| format!("cannot write campaign to {}", dir.display()))?;
            println!(
                "{id}: {} records ({} supply voltages {}..{} V x {} frequencies {}..{} GHz) written to {}",
                grid.len(),
                grid.vsup().len(),
                grid.vsup()[0],
                grid.vsup()[grid.vsup().len() - 1],
                grid.freq().len(),
                grid.freq()[0],
                grid.freq()[grid.freq().len() - 1],
                dir.display()
            );
            Ok(())
        }

        Command::Fit {
            campaign,
            basic,
            gain,
            smoothness,
            vsat,
            output,
        } => {
            let campaign = load_aligned(&campaign)?;
            let opts = RappFitOptions::default();
            let mut outputs = Outputs::new();
            if basic {
                let fits = fit_param_map(&campaign, &opts)?;
                print_point_summary(&fits);
                let dir = resolve(&output, "param_maps");
                let params = fits.map(|r| r.result);
                for param in Param::ALL {
                    let path = dir.join(format!("heatmap_{param}.csv"));
                    outputs.write(&path, &heatmap_to_csv(&export_heatmap(&params.map(|p| param.of(p)))))?;
                }
                println!("per-point parameter maps written to {}", dir.display());
            } else {
                let forms = FormSpec {
                    gain: parse_form(&gain).context("--gain")?,
                    smoothness: parse_form(&smoothness).context("--smoothness")?,
                    vsat: parse_form(&vsat).context("--vsat")?,
                };
                let fit = fit_extended_model(&campaign, &forms, &opts)?;
                print_point_summary(&fit.point_fits);
                for param in Param::ALL {
                    let s = fit.surfaces.get(param);
                    println!(
                        "surface {param}: {} coefficients, rmse {:.6e} (parameter units)",
                        s.result.n_coefficients(),
                        s.rmse
                    );
                }
                let path = resolve(&output, "model.json");
                outputs.write(&path, &ModelFile::from_fit(&campaign, &fit).to_json())?;
                println!("model written to {}", path.display());
            }
            outputs.commit();
            Ok(())
        }

        Command::Select {
            input,
            param,
            max_degree,
            start_degree,
            plateau,
            min_terms,
            output,
        } => {
            let param: Param = param.parse()?;
            let map = if input.is_dir() {
                let campaign = load_aligned(&input)?;
                fit_param_map(&campaign, &RappFitOptions::default())?.map(|r| param.of(&r.result))
            } else {
                let text = std::fs::read_to_string(&input).with_context(|| format!("cannot read {}", input.display()))?;
                heatmap_from_csv(&text).with_context(|| format!("in {}", input.display()))?
            };
            let samples = map.samples();
            let degree = match start_degree {
                Some(d) => d,
                None => choose_initial_degree(&samples, max_degree)?,
            };
            let trace = eliminate(&samples, &full_basis(degree), plateau, min_terms)?;
            let rows = export_trace(&trace);
            let path = resolve(&output, &format!("trace_{param}.csv"));
            let mut outputs = Outputs::new();
            outputs.write(&path, &trace_to_csv(&rows))?;
            outputs.commit();
            let selected: Vec<String> = trace.selected_basis.iter().map(|m| m.to_string()).collect();
            println!(
                "start degree {degree} ({} terms, rmse {:.6e}); selected {} terms: {}",
                trace.initial_basis.len(),
                trace.baseline_rmse,
                selected.len(),
                selected.join(",")
            );
            println!(
                "stopped: {}; trace written to {}",
                match trace.stop_reason {
                    StopReason::PlateauExceeded => "next removal exceeds the rmse plateau",
                    StopReason::MinTermsReached => "minimum term count reached",
                },
                path.display()
            );
            Ok(())
        }

        Command::Compare {
            campaign,
            model,
            ref_freq,
            overlays,
            output,
        } => {
            let campaign = load_aligned(&campaign)?;
            let overlay_ops = overlays.iter().map(|s| parse_op(s)).collect::<Result<Vec<_>>>()?;
            let opts = RappFitOptions::default();
            let (params, extended) = match model {
                Some(path) => {
                    let model = ModelFile::load(&path)?.model();
                    (fit_param_map(&campaign, &opts)?.map(|r| r.result), model)
                }
                None => {
                    let fit = fit_extended_model(&campaign, &FormSpec::default(), &opts)?;
                    (fit.param_map(), fit.model)
                }
            };
            let variants = [
                ModelVariant::Basic(params.clone()),
                ModelVariant::Extended(extended),
                ModelVariant::no_freq_from_map(&params, ref_freq)?,
            ];
            let report = compare_variants(&campaign, &variants)?;

            let dir = resolve(&output, "compare");
            let mut outputs = Outputs::new();
            let mut summary = String::from("variant,mean_nrmse,ref_freq,normalization,aggregation\n");
            for v in &report.variants {
                let ref_freq = v.ref_freq.map(|f| format!("{f:.3}")).unwrap_or_default();
                let _ = writeln!(
                    summary,
                    "{},{:.12},{ref_freq},{},{}",
                    v.name, v.mean_nrmse, report.normalization, report.aggregation
                );
                outputs.write(
                    &dir.join(format!("nrmse_{}.csv", v.name)),
                    &heatmap_to_csv(&export_heatmap(&v.per_point)),
                )?;
                println!("{:<17} mean NRMSE {:.6}", v.name, v.mean_nrmse);
            }
            outputs.write(&dir.join("summary.csv"), &summary)?;
            for op in overlay_ops {
                let record = campaign.get(op).ok_or(rappsurf::Error::MissingGridCell(op))?;
                let rows = amam_overlay(record, &variants)?;
                let mut csv = String::from("input_amp,measured_amp");
                for v in &variants {
                    csv.push(',');
                    csv.push_str(v.name());
                }
                csv.push('\n');
                for (x, y, preds) in rows {
                    let _ = write!(csv, "{x:e},{y:e}");
                    for p in preds {
                        let _ = write!(csv, ",{p:e}");
                    }
                    csv.push('\n');
                }
                let name = format!("overlay_v{:.3}_f{:.3}.csv", op.vsup, op.freq);
                outputs.write(&dir.join(name), &csv)?;
            }
            outputs.commit();
            println!("comparison written to {}", dir.display());
            Ok(())
        }

        Command::ExportHeatmap {
            campaign,
            model,
            vsup,
            freq,
            param,
            output,
        } => {
            let params: Vec<Param> = if param == "all" {
                Param::ALL.to_vec()
            } else {
                vec![param.parse()?]
            };
            let map: GridMap<RappParams> = match (model, campaign) {
                (Some(path), _) => {
                    let model = ModelFile::load(&path)?.model();
                    let grid = parse_grid(&vsup, &freq)?;
                    let values = grid
                        .ops()
                        .map(|op| model.params_at(op).map(|c| c.params))
                        .collect::<rappsurf::Result<Vec<_>>>()?;
                    GridMap::new(grid, values)?
                }
                (None, Some(dir)) => {
                    let campaign = load_aligned(&dir)?;
                    fit_param_map(&campaign, &RappFitOptions::default())?.map(|r| r.result)
                }
                (None, None) => bail!("give a campaign directory or --model"),
            };
            let dir = resolve(&output, "heatmaps");
            let mut outputs = Outputs::new();
            for p in params {
                let path = dir.join(format!("heatmap_{p}.csv"));
                outputs.write(&path, &heatmap_to_csv(&export_heatmap(&map.map(|r| p.of(r)))))?;
            }
            outputs.commit();
            println!("heatmaps written to {}", dir.display());
            Ok(())
        }
    }
}

fn parse_grid(vsup: &str, freq: &str) -> Result<Grid> {
    let v = parse_axis(vsup).context("--vsup")?;
    let f = parse_axis(freq).context("--freq")?;
    Ok(Grid::new(v, f)?)
}

fn load_aligned(dir: &Path) -> Result<Campaign> {
    let (campaign, _) = load_campaign(dir).with_context(|| format!("cannot load campaign {}", dir.display()))?;
    Ok(align_campaign(&campaign)?)
}

/// `log-product`, `log-product-no-f2`, or a comma list of monomials.
fn parse_form(spec: &str) -> Result<SurfaceForm> {
    Ok(match spec.trim() {
        "log-product" => SurfaceForm::LogProduct {
            freq_degree: 3,
            include_f2: true,
        },
        "log-product-no-f2" => SurfaceForm::LogProduct {
            freq_degree: 3,
            include_f2: false,
        },
        list => SurfaceForm::Polynomial(
            list.split(',')
                .map(|m| m.parse::<Monomial>())
                .collect::<rappsurf::Result<Vec<_>>>()?,
        ),
    })
}

fn parse_op(spec: &str) -> Result<OperatingPoint> {
    let (v, f) = spec
        .split_once(':')
        .with_context(|| format!("operating point {spec:?} must look like vsup:freq"))?;
    let v: f64 = v.trim().parse().with_context(|| format!("bad supply voltage in {spec:?}"))?;
    let f: f64 = f.trim().parse().with_context(|| format!("bad frequency in {spec:?}"))?;
    Ok(OperatingPoint::new(v, f)?)
}

fn print_point_summary(fits: &GridMap<FitReport<RappParams>>) {
    let n = fits.values().len();
    let unconverged = fits.values().iter().filter(|r| !r.converged).count();
    let range = |param: Param| {
        fits.values()
            .iter()
            .map(|r| param.of(&r.result))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let worst_rmse = fits.values().iter().map(|r| r.rmse).fold(0.0, f64::max);
    println!("per-point fits: {n} points, {unconverged} not converged, worst AM/AM rmse {worst_rmse:.3e} V");
    for param in Param::ALL {
        let (lo, hi) = range(param);
        println!("  {param:<5} {lo:.4} .. {hi:.4}");
    }
}
