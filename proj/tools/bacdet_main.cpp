#include "bacdet/pipeline.hpp"

#include "CLI11.hpp"

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

bacdet::Split parse_split(const std::string& name) {
  if (name == "train") return bacdet::Split::train;
  if (name == "test") return bacdet::Split::test;
  throw bacdet::config_error("unknown split '" + name + "' (expected train or test)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bacdet: bacilli detection pipeline (segmentation + ensemble classification)"};
  app.require_subcommand(1);

  std::string config_path, manifest_override, out_override;
  std::optional<std::uint64_t> seed_override;
  std::optional<int> workers_override;
  app.add_option("--config", config_path, "pipeline config file (JSON)");
  app.add_option("--seed", seed_override, "override the experiment seed");
  app.add_option("--workers", workers_override, "override the worker thread count");
  app.add_option("--manifest", manifest_override, "override the dataset manifest path");
  app.add_option("--out", out_override, "override the output directory");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::string synth_out;
  int synth_n = 0;
  synth->add_option("--corpus-dir", synth_out, "corpus output directory");
  synth->add_option("--n", synth_n, "number of images");

  auto* tile_cmd = app.add_subcommand("tile", "dump patch decompositions");
  std::string tile_split = "train", tile_out;
  tile_cmd->add_option("--split", tile_split, "train|test");
  tile_cmd->add_option("--patches-dir", tile_out, "patch output directory");

  auto* train_seg = app.add_subcommand("train-seg", "train the segmentation model");
  train_seg->alias("train_seg");

  auto* infer_seg = app.add_subcommand("infer-seg", "write predicted masks");
  infer_seg->alias("infer_seg");
  std::string infer_split = "test", infer_out, segmenter_override;
  infer_seg->add_option("--split", infer_split, "train|test");
  infer_seg->add_option("--masks-dir", infer_out, "predicted mask directory");
  infer_seg->add_option("--segmenter", segmenter_override, "unet|otsu:gray|otsu:rg");

  auto* extract = app.add_subcommand("extract-rois", "crop candidate regions from masks");
  extract->alias("extract_rois");
  std::string extract_split = "test", extract_masks, extract_out;
  extract->add_option("--split", extract_split, "train|test");
  extract->add_option("--masks-dir", extract_masks,
                      "mask directory (defaults to ground-truth masks)");
  extract->add_option("--rois-dir", extract_out, "region output directory");

  auto* train_clf = app.add_subcommand("train-clf", "train the ensemble classifier");
  train_clf->alias("train_clf");

  auto* detect = app.add_subcommand("detect", "segment, classify and overlay detections");
  std::string detect_split = "test";
  detect->add_option("--split", detect_split, "train|test");
  detect->add_option("--segmenter", segmenter_override, "unet|otsu:gray|otsu:rg");

  auto* evaluate = app.add_subcommand("evaluate", "score segmenters and the classifier");
  std::string eval_split = "test";
  std::vector<std::string> eval_segmenters;
  bool seg_only = false;
  evaluate->add_option("--split", eval_split, "train|test");
  evaluate->add_option("--segmenter", eval_segmenters, "segmenter to score (repeatable)");
  evaluate->add_flag("--seg-only", seg_only, "skip the classification section");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    bacdet::PipelineConfig cfg;
    if (!config_path.empty()) cfg = bacdet::PipelineConfig::load(config_path);
    if (!manifest_override.empty()) cfg.manifest_path = manifest_override;
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (seed_override) {
      cfg.train.seed = *seed_override;
      cfg.synth.seed = *seed_override;
    }
    if (workers_override) {
      cfg.train.workers = *workers_override;
      cfg.classifier.boost.workers = *workers_override;
    }
    if (!segmenter_override.empty()) cfg.segmenter = segmenter_override;
    cfg.validate();

    if (app.got_subcommand(synth)) {
      const auto dir = synth_out.empty() ? cfg.out_dir / "corpus"
                                         : std::filesystem::path(synth_out);
      bacdet::cmd_synth(cfg, synth_n > 0 ? synth_n : cfg.n_images, dir, std::cout);
    } else if (app.got_subcommand(tile_cmd)) {
      const auto dir = tile_out.empty() ? cfg.out_dir / "patches"
                                        : std::filesystem::path(tile_out);
      bacdet::cmd_tile(cfg, parse_split(tile_split), dir, std::cout);
    } else if (app.got_subcommand(train_seg)) {
      bacdet::cmd_train_seg(cfg, std::cout);
    } else if (app.got_subcommand(infer_seg)) {
      const auto dir = infer_out.empty() ? cfg.out_dir / "pred_masks"
                                         : std::filesystem::path(infer_out);
      bacdet::cmd_infer_seg(cfg, parse_split(infer_split), dir, std::cout);
    } else if (app.got_subcommand(extract)) {
      const auto dir = extract_out.empty() ? cfg.out_dir / "rois"
                                           : std::filesystem::path(extract_out);
      bacdet::cmd_extract_rois(cfg, parse_split(extract_split), extract_masks, dir, std::cout);
    } else if (app.got_subcommand(train_clf)) {
      bacdet::cmd_train_clf(cfg, std::cout);
    } else if (app.got_subcommand(detect)) {
      bacdet::cmd_detect(cfg, parse_split(detect_split), std::cout);
    } else if (app.got_subcommand(evaluate)) {
      bacdet::EvaluateOptions opts;
      opts.split = parse_split(eval_split);
      opts.segmenters = eval_segmenters;
      opts.classification = !seg_only;
      bacdet::cmd_evaluate(cfg, opts, std::cout);
    }
  } catch (const bacdet::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const bacdet::io_error& e) {
    std::cerr << "missing artifact: " << e.what() << "\n";
    return 3;
  } catch (const bacdet::data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
