// probekit: build probing datasets from SSF corpora, perturb them, probe
// layer-wise embeddings and report robustness.

#include <iostream>

#include "CLI11.hpp"
#include "probekit/commands.hpp"

namespace {

void add_common(CLI::App* cmd, probekit::CommonOptions& common, bool with_seed = true) {
  cmd->add_option("--out", common.out, "Output directory")->required();
  cmd->add_flag("--force", common.force, "Rerun even if the output is complete");
  cmd->add_option("--config", common.config, "JSON config file")->check(CLI::ExistingFile);
  if (with_seed) cmd->add_option("--seed", common.seed, "Base random seed (default 0)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"probekit: layer-wise probing and perturbation robustness toolkit"};
  app.set_version_flag("--version", probekit::tool_version());
  app.require_subcommand(1);

  probekit::ValidateOptions validate;
  auto* v = app.add_subcommand("validate", "Check SSF files and list parse errors as JSON lines");
  v->add_option("inputs", validate.inputs, "SSF files")->required();
  v->add_option("--out", validate.out, "Also write validation.jsonl here");
  v->add_flag("--force", validate.force, "Rerun even if the output is complete");

  probekit::BuildDatasetOptions build;
  auto* b = app.add_subcommand("build-dataset", "Extract the probing task datasets");
  b->add_option("inputs", build.inputs, "SSF files")->required();
  b->add_option("--tasks", build.tasks, "Tasks to build (default: all)")->delimiter(',');
  b->add_option("--lang", build.language, "Language code (hi, kn, te, ml, ...)");
  add_common(b, build.common);

  probekit::PerturbOptions perturb;
  auto* p = app.add_subcommand("perturb", "Apply text perturbations to a dataset directory");
  p->add_option("--dataset", perturb.dataset, "Directory written by build-dataset")->required();
  p->add_option("--kinds", perturb.kinds, "Perturbations (default: all 13)")->delimiter(',');
  p->add_option("--tasks", perturb.tasks, "Tasks (default: all present)")->delimiter(',');
  add_common(p, perturb.common);

  probekit::FixtureEmbedOptions embed;
  auto* f = app.add_subcommand("fixture-embed", "Generate synthetic embeddings for datasets");
  f->add_option("--dataset", embed.dataset, "Dataset directory (searched recursively)")
      ->required();
  f->add_option("--layers", embed.layers, "Number of layers")->capture_default_str();
  f->add_option("--dim", embed.dim, "Vector dimension")->capture_default_str();
  f->add_option("--signal", embed.signal, "Planted label signal, e.g. 'layers=7;strength=5'");
  f->add_option("--model", embed.model, "Model name written to the header")
      ->capture_default_str();
  add_common(f, embed.common);

  probekit::ProbeOptions probe;
  auto* r = app.add_subcommand("probe", "Train and cross-validate per-layer linear probes");
  r->add_option("--dataset", probe.datasets, "Dataset directory (repeatable)")->required();
  r->add_option("--embeddings", probe.embeddings, "Embedding directory for each --dataset")
      ->required();
  r->add_option("--layers", probe.layers, "Layers to report (default: all)")->delimiter(',');
  r->add_option("--tasks", probe.tasks, "Tasks (default: all)")->delimiter(',');
  r->add_option("--jobs", probe.jobs, "Layers trained in parallel")->capture_default_str();
  add_common(r, probe.common);

  probekit::ReportOptions report;
  auto* t = app.add_subcommand("report", "Robustness tables from probe results");
  t->add_option("--results", report.results, "results.csv files (repeatable)")->required();
  t->add_option("--group-by", report.group_by,
                "Comma-separated dims per table (repeatable); default: standard pairs");
  t->add_option("--top-k", report.top_k, "Most affected layers listed")->capture_default_str();
  t->add_flag("--plots", report.plots, "Also write SVG heatmaps");
  add_common(t, report.common, /*with_seed=*/false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? probekit::kExitOk : probekit::kExitConfig;
  }

  if (v->parsed()) return probekit::cmd_validate(validate);
  if (b->parsed()) return probekit::cmd_build_dataset(build);
  if (p->parsed()) return probekit::cmd_perturb(perturb);
  if (f->parsed()) return probekit::cmd_fixture_embed(embed);
  if (r->parsed()) return probekit::cmd_probe(probe);
  if (t->parsed()) return probekit::cmd_report(report);
  return probekit::kExitConfig;
}
