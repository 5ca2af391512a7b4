#include "bacdet/pipeline.hpp"

#include "bacdet/image_io.hpp"
#include "bacdet/metrics.hpp"
#include "bacdet/otsu.hpp"
#include "bacdet/parallel.hpp"
#include "bacdet/rng.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace bacdet {

namespace {

const char* policy_name(TilePolicy policy) {
  return policy == TilePolicy::crop ? "crop" : "pad";
}

TilePolicy policy_from_string(const std::string& name) {
  if (name == "crop") return TilePolicy::crop;
  if (name == "pad") return TilePolicy::pad;
  throw config_error("unknown tile policy '" + name + "' (expected crop or pad)");
}

nlohmann::json roi_filter_to_json(const RoiFilter& f) {
  return {{"min_area", f.min_area},
          {"max_area", f.max_area},
          {"margin", f.margin},
          {"connectivity", f.connectivity}};
}

RoiFilter roi_filter_from_json(const nlohmann::json& j) {
  RoiFilter f;
  f.min_area = j.at("min_area").get<std::int64_t>();
  f.max_area = j.at("max_area").get<std::int64_t>();
  f.margin = j.at("margin").get<int>();
  f.connectivity = j.at("connectivity").get<int>();
  return f;
}

/// Applies `patch` over `base` field by field; a key absent from `base` is a
/// config error reported with its full dotted path.
void merge_config(nlohmann::json& base, const nlohmann::json& patch, const std::string& scope) {
  if (!patch.is_object())
    throw config_error("config section '" + (scope.empty() ? "<root>" : scope) +
                       "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    auto it = base.find(key);
    if (it == base.end()) throw config_error("unknown config key '" + scope + key + "'");
    if (it->is_object() && value.is_object())
      merge_config(*it, value, scope + key + ".");
    else
      *it = value;
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw io_error("failed writing " + path.string());
}

Image crop_to(const Image& image, int h, int w) {
  if (image.height() == h && image.width() == w) return image;
  Image out;
  out.id = image.id;
  out.source_path = image.source_path;
  for (int c = 0; c < 3; ++c)
    out.channels[static_cast<std::size_t>(c)] =
        image.channels[static_cast<std::size_t>(c)].topLeftCorner(h, w);
  return out;
}

const char* split_name(Split split) { return split == Split::train ? "train" : "test"; }

}  // namespace

void PipelineConfig::validate() const {
  if (out_dir.empty()) throw config_error("out_dir must not be empty");
  if (patch_size < 8) throw config_error("patch_size must be >= 8");
  if (segmenter != "unet" && segmenter != "otsu:gray" && segmenter != "otsu:rg")
    throw config_error("unknown segmenter '" + segmenter + "'");
  if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0))
    throw config_error("binarize_threshold must lie in (0, 1)");
  model.validate();
  if (model.input_size != patch_size)
    throw config_error("model input_size must equal patch_size");
  train.validate();
  synth.validate();
  feature_length(feature_spec);
  if (n_images < 1) throw config_error("n_images must be >= 1");
  if (harvest.n_pos < 1 || harvest.n_neg < 1)
    throw config_error("harvest pool sizes must be >= 1");
  if (roi_filter.min_area < 1 || roi_filter.max_area < roi_filter.min_area)
    throw config_error("roi filter area bounds invalid");
  if (roi_filter.margin < 0) throw config_error("roi filter margin must be >= 0");
  if (roi_filter.connectivity != 4 && roi_filter.connectivity != 8)
    throw config_error("roi filter connectivity must be 4 or 8");
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"manifest", manifest_path.string()},
          {"out_dir", out_dir.string()},
          {"seg_checkpoint", seg_checkpoint.string()},
          {"clf_checkpoint", clf_checkpoint.string()},
          {"patch_size", patch_size},
          {"tile_policy", policy_name(tile_policy)},
          {"segmenter", segmenter},
          {"binarize_threshold", binarize_threshold},
          {"model", model.to_json()},
          {"train", train.to_json()},
          {"roi_filter", roi_filter_to_json(roi_filter)},
          {"feature_spec", feature_spec},
          {"classifier", classifier.to_json()},
          {"synth", synth.to_json()},
          {"n_images", n_images},
          {"harvest", {{"n_pos", harvest.n_pos}, {"n_neg", harvest.n_neg}}}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  nlohmann::json merged = PipelineConfig{}.to_json();
  merge_config(merged, j, "");
  PipelineConfig c;
  try {
    c.manifest_path = merged.at("manifest").get<std::string>();
    c.out_dir = merged.at("out_dir").get<std::string>();
    c.seg_checkpoint = merged.at("seg_checkpoint").get<std::string>();
    c.clf_checkpoint = merged.at("clf_checkpoint").get<std::string>();
    c.patch_size = merged.at("patch_size").get<int>();
    c.tile_policy = policy_from_string(merged.at("tile_policy").get<std::string>());
    c.segmenter = merged.at("segmenter").get<std::string>();
    c.binarize_threshold = merged.at("binarize_threshold").get<double>();
    c.model = SegModelConfig::from_json(merged.at("model"));
    c.train = TrainConfig::from_json(merged.at("train"));
    c.roi_filter = roi_filter_from_json(merged.at("roi_filter"));
    c.feature_spec = merged.at("feature_spec").get<std::string>();
    c.classifier = ClassifierHyper::from_json(merged.at("classifier"));
    c.synth = SynthConfig::from_json(merged.at("synth"));
    c.n_images = merged.at("n_images").get<int>();
    c.harvest.n_pos = merged.at("harvest").at("n_pos").get<int>();
    c.harvest.n_neg = merged.at("harvest").at("n_neg").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("malformed pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open config file " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw config_error("config file " + path.string() + " is not valid JSON");
  return from_json(j);
}

Segmenter Segmenter::make(const PipelineConfig& config, const std::string& name) {
  Segmenter s;
  s.name_ = name;
  s.patch_size_ = config.patch_size;
  s.policy_ = config.tile_policy;
  s.threshold_ = config.binarize_threshold;
  if (name == "unet") {
    s.model_ = nn::AttentionResUNet<float>::load(config.seg_checkpoint_path());
    s.patch_size_ = s.model_->config().input_size;
  } else {
    s.otsu_ = otsu_preset(name);
  }
  return s;
}

BinaryMask Segmenter::segment(const Image& image) const {
  if (!model_) {
    BinaryMask mask = otsu_segment(image, otsu_);
    if (policy_ == TilePolicy::crop) {
      const PatchGrid grid =
          make_grid(image.height(), image.width(), patch_size_, policy_, image.id);
      mask.bits = BytePlane(
          mask.bits.topLeftCorner(grid.rows * patch_size_, grid.cols * patch_size_));
    }
    return mask;
  }
  const PatchGrid grid = make_grid(image.height(), image.width(), patch_size_, policy_, image.id);
  const std::vector<Patch> patches = tile(image, patch_size_, policy_);
  std::vector<MaskPatch> pred(patches.size());
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto input = nn::to_feature_map<float>(patches[i].pixels);
    const auto prob = model_->forward_eval(input);
    pred[i].bits = binarize(prob, static_cast<float>(threshold_)).bits;
    pred[i].row = patches[i].row;
    pred[i].col = patches[i].col;
  }
  BinaryMask mask = stitch(pred, grid);
  if (policy_ == TilePolicy::pad)
    mask.bits = BytePlane(mask.bits.topLeftCorner(image.height(), image.width()));
  mask.image_id = image.id;
  return mask;
}

DatasetManifest cmd_synth(const PipelineConfig& config, int n_images,
                          const std::filesystem::path& out_dir, std::ostream& log) {
  std::vector<std::string> warnings;
  DatasetManifest manifest = generate_corpus(config.synth, n_images, out_dir, &warnings);
  std::size_t n_train = manifest.split_entries(Split::train).size();
  std::size_t n_test = manifest.split_entries(Split::test).size();
  log << "wrote " << manifest.entries.size() << " images under " << out_dir.string() << " ("
      << n_train << " train / " << n_test << " test)\n";
  for (const auto& w : warnings) log << "warning: " << w << "\n";
  return manifest;
}

int cmd_tile(const PipelineConfig& config, Split split, const std::filesystem::path& out_dir,
             std::ostream& log) {
  const DatasetManifest manifest = load_manifest(config.manifest_path);
  std::filesystem::create_directories(out_dir);
  int total = 0;
  for (const ManifestEntry* entry : manifest.split_entries(split)) {
    const Image image = load_image(entry->image_path, entry->image_id);
    const BinaryMask mask =
        load_mask(entry->mask_path, image.height(), image.width(), entry->image_id);
    const auto patches = tile(image, config.patch_size, config.tile_policy);
    const auto mask_patches = tile_mask(mask, config.patch_size, config.tile_policy);
    for (std::size_t i = 0; i < patches.size(); ++i) {
      const std::string stem = patch_name(entry->image_id, patches[i].row, patches[i].col);
      Image p;
      p.channels = patches[i].pixels;
      p.id = stem;
      save_image_png(p, out_dir / (stem + ".png"));
      BinaryMask mp;
      mp.bits = mask_patches[i].bits;
      mp.image_id = stem;
      save_mask_png(mp, out_dir / (stem + "_mask.png"));
    }
    log << entry->image_id << ": " << patches.size() << " patches\n";
    total += static_cast<int>(patches.size());
  }
  log << "total: " << total << " patches\n";
  return total;
}

TrainResult cmd_train_seg(const PipelineConfig& config, std::ostream& log) {
  const DatasetManifest manifest = load_manifest(config.manifest_path);
  std::filesystem::create_directories(config.out_dir);

  std::string log_lines;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& rec) {
    const std::string line = format_epoch_line(rec);
    log << line << "\n";
    log_lines += line;
    log_lines += '\n';
  };
  TrainResult result =
      train_segmenter(manifest, config.model, config.train, config.tile_policy, hooks);

  const auto ckpt = config.seg_checkpoint_path();
  if (ckpt.has_parent_path()) std::filesystem::create_directories(ckpt.parent_path());
  result.model.save(ckpt);
  log_lines += "best epoch: " + std::to_string(result.best_epoch) + "\n";
  write_text_file(config.out_dir / "train_seg_log.txt", log_lines);
  log << "best epoch: " << result.best_epoch << "\nsaved " << ckpt.string() << "\n";
  return result;
}

int cmd_infer_seg(const PipelineConfig& config, Split split,
                  const std::filesystem::path& mask_dir, std::ostream& log) {
  const DatasetManifest manifest = load_manifest(config.manifest_path);
  const Segmenter segmenter = Segmenter::make(config, config.segmenter);
  const auto entries = manifest.split_entries(split);
  std::filesystem::create_directories(mask_dir);
  parallel_for(entries.size(), config.train.workers, [&](std::size_t i) {
    const Image image = load_image(entries[i]->image_path, entries[i]->image_id);
    const BinaryMask mask = segmenter.segment(image);
    save_mask_png(mask, mask_dir / (entries[i]->image_id + ".png"));
  });
  log << "segmented " << entries.size() << " images with " << segmenter.name() << " into "
      << mask_dir.string() << "\n";
  return static_cast<int>(entries.size());
}

int cmd_extract_rois(const PipelineConfig& config, Split split,
                     const std::filesystem::path& mask_dir,
                     const std::filesystem::path& out_dir, std::ostream& log) {
  const DatasetManifest manifest = load_manifest(config.manifest_path);
  std::filesystem::create_directories(out_dir);
  std::string records;
  int total = 0;
  for (const ManifestEntry* entry : manifest.split_entries(split)) {
    Image image = load_image(entry->image_path, entry->image_id);
    BinaryMask mask;
    if (mask_dir.empty()) {
      mask = load_mask(entry->mask_path, image.height(), image.width(), entry->image_id);
    } else {
      const auto path = mask_dir / (entry->image_id + ".png");
      mask = load_mask_any_size(path, entry->image_id);
      if (mask.height() > image.height() || mask.width() > image.width())
        throw data_error("predicted mask larger than image for '" + entry->image_id + "'");
      image = crop_to(image, mask.height(), mask.width());
    }
    const auto rois = extract_rois(image, mask, config.roi_filter);
    for (const Roi& roi : rois) {
      Image crop;
      crop.channels = roi.pixels;
      crop.id = roi.region_id();
      save_image_png(crop, out_dir / (roi.region_id() + ".png"));
      nlohmann::json j = {{"region_id", roi.region_id()},
                          {"image", roi.source_image_id},
                          {"bbox", {roi.bbox.x, roi.bbox.y, roi.bbox.w, roi.bbox.h}},
                          {"area", roi.area_px}};
      records += j.dump();
      records += '\n';
    }
    log << entry->image_id << ": " << rois.size() << " regions\n";
    total += static_cast<int>(rois.size());
  }
  write_text_file(out_dir / "rois.jsonl", records);
  log << "total: " << total << " regions\n";
  return total;
}

HarvestedPool harvest_split(const PipelineConfig& config, const DatasetManifest& manifest,
                            Split split, std::uint64_t seed) {
  HarvestedPool pool;
  const auto entries = manifest.split_entries(split);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Image image = load_image(entries[i]->image_path, entries[i]->image_id);
    const BinaryMask truth =
        load_mask(entries[i]->mask_path, image.height(), image.width(), entries[i]->image_id);
    const int n_comp =
        static_cast<int>(extract_rois(image, truth, config.roi_filter).size());
    if (n_comp == 0) continue;
    const HarvestResult h = harvest_labeled_regions(image, truth, n_comp, n_comp,
                                                    derive_seed(seed, i, 0xA7u),
                                                    config.roi_filter);
    for (const LabeledRegion& r : h.regions)
      (r.label == RegionLabel::bacilli ? pool.positives : pool.negatives).push_back(r);
  }
  std::mt19937_64 rng(derive_seed(seed, 0x9au, 0x11u));
  std::shuffle(pool.positives.begin(), pool.positives.end(), rng);
  std::shuffle(pool.negatives.begin(), pool.negatives.end(), rng);
  return pool;
}

std::vector<TrainingAccuracyRow> cmd_train_clf(const PipelineConfig& config, std::ostream& log) {
  const DatasetManifest manifest = load_manifest(config.manifest_path);
  std::filesystem::create_directories(config.out_dir);
  const std::uint64_t seed = config.train.seed;
  HarvestedPool pool = harvest_split(config, manifest, Split::train, derive_seed(seed, 0x7u, 0x1u));

  const int need_pos = 3 * config.harvest.n_pos;
  const int need_neg = 3 * config.harvest.n_neg;
  if (static_cast<int>(pool.positives.size()) < need_pos)
    throw data_error("train split yields " + std::to_string(pool.positives.size()) +
                     " bacilli regions; need " + std::to_string(need_pos));
  if (static_cast<int>(pool.negatives.size()) < need_neg)
    throw data_error("train split yields " + std::to_string(pool.negatives.size()) +
                     " non-bacilli regions; need " + std::to_string(need_neg));

  auto item_of = [&](const LabeledRegion& r) {
    TrainingItem item;
    item.features = featurize(r.roi, config.feature_spec);
    item.label = r.label;
    item.region_id = r.region_id;
    return item;
  };

  std::array<std::vector<TrainingItem>, 3> pools;
  for (int k = 0; k < 3; ++k) {
    auto& p = pools[static_cast<std::size_t>(k)];
    for (int i = 0; i < config.harvest.n_pos; ++i)
      p.push_back(item_of(pool.positives[static_cast<std::size_t>(k * config.harvest.n_pos + i)]));
    for (int i = 0; i < config.harvest.n_neg; ++i)
      p.push_back(item_of(pool.negatives[static_cast<std::size_t>(k * config.harvest.n_neg + i)]));
  }

  const TrainedEnsemble ensemble = train_ensemble(pools, config.classifier, seed);
  const auto ckpt = config.clf_checkpoint_path();
  if (ckpt.has_parent_path()) std::filesystem::create_directories(ckpt.parent_path());
  ensemble.save(ckpt);

  auto accuracy_on = [](auto&& predict, const std::vector<TrainingItem>& items) {
    int correct = 0;
    for (const auto& item : items)
      if (predict(item.features) == item.label) ++correct;
    return items.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(items.size());
  };

  std::vector<TrainingAccuracyRow> rows;
  for (std::size_t k = 0; k < kEnsembleKinds.size(); ++k) {
    const BaseModel& variant = ensemble.individual_variants[k];
    rows.push_back({to_string(kEnsembleKinds[k]), config.harvest.n_pos, config.harvest.n_neg,
                    accuracy_on([&](const FeatureVector& f) { return variant.predict(f); },
                                pools[k])});
  }
  std::vector<TrainingItem> all;
  for (const auto& p : pools) all.insert(all.end(), p.begin(), p.end());
  rows.push_back({"ensemble", 3ll * config.harvest.n_pos, 3ll * config.harvest.n_neg,
                  accuracy_on([&](const FeatureVector& f) { return ensemble.predict(f); }, all)});

  const std::string table = render_training_accuracy_table(rows);
  write_text_file(config.out_dir / "train_clf_report.txt", table);
  write_text_file(config.out_dir / "train_clf_report.json",
                  training_accuracy_records(rows).dump(2) + "\n");
  log << table << "saved " << ckpt.string() << "\n";
  return rows;
}

std::vector<DetectionRecord> cmd_detect(const PipelineConfig& config, Split split,
                                        std::ostream& log) {
  const DatasetManifest manifest = load_manifest(config.manifest_path);
  const Segmenter segmenter = Segmenter::make(config, config.segmenter);
  const TrainedEnsemble ensemble = TrainedEnsemble::load(config.clf_checkpoint_path());
  const auto overlay_dir = config.out_dir / "overlays";
  std::filesystem::create_directories(overlay_dir);

  std::vector<DetectionRecord> all;
  std::string lines;
  for (const ManifestEntry* entry : manifest.split_entries(split)) {
    const Image image = load_image(entry->image_path, entry->image_id);
    const BinaryMask mask = segmenter.segment(image);
    const Image scored = crop_to(image, mask.height(), mask.width());
    const auto rois = extract_rois(scored, mask, config.roi_filter);

    std::vector<DetectionRecord> records;
    for (const Roi& roi : rois) {
      const FeatureVector fv = featurize(roi, ensemble.feature_spec_id);
      const auto votes = ensemble.votes(fv);
      DetectionRecord rec;
      rec.image_id = entry->image_id;
      rec.bbox = roi.bbox;
      rec.area_px = roi.area_px;
      int bacilli_votes = 0;
      for (std::size_t k = 0; k < votes.size(); ++k) {
        const int v = votes[k] == RegionLabel::bacilli ? 1 : 0;
        bacilli_votes += v;
        rec.votes.emplace_back(to_string(kEnsembleKinds[k]), v);
      }
      rec.label = bacilli_votes >= 2 ? RegionLabel::bacilli : RegionLabel::non_bacilli;
      lines += detection_record_line(rec);
      lines += '\n';
      records.push_back(std::move(rec));
    }
    save_image_png(draw_boxes(image, records), overlay_dir / (entry->image_id + ".png"));
    log << entry->image_id << ": " << records.size() << " regions\n";
    all.insert(all.end(), std::make_move_iterator(records.begin()),
               std::make_move_iterator(records.end()));
  }
  write_text_file(config.out_dir / "detections.jsonl", lines);
  log << "total: " << all.size() << " regions\n";
  return all;
}

Image draw_boxes(const Image& image, const std::vector<DetectionRecord>& records) {
  Image out = image;
  const int h = out.height(), w = out.width();
  auto put = [&](int y, int x) {
    if (y < 0 || y >= h || x < 0 || x >= w) return;
    out.channels[0](y, x) = 0;
    out.channels[1](y, x) = 255;
    out.channels[2](y, x) = 0;
  };
  for (const DetectionRecord& rec : records) {
    if (rec.label != RegionLabel::bacilli) continue;
    const BBox& b = rec.bbox;
    for (int x = b.x; x < b.x + b.w; ++x) {
      put(b.y, x);
      put(b.y + b.h - 1, x);
    }
    for (int y = b.y; y < b.y + b.h; ++y) {
      put(y, b.x);
      put(y, b.x + b.w - 1);
    }
  }
  return out;
}

EvaluateResult cmd_evaluate(const PipelineConfig& config, const EvaluateOptions& options,
                            std::ostream& log) {
  const DatasetManifest manifest = load_manifest(config.manifest_path);
  const auto entries = manifest.split_entries(options.split);
  if (entries.empty())
    throw data_error(std::string("no images in the ") + split_name(options.split) + " split");
  std::filesystem::create_directories(config.out_dir);

  std::vector<std::string> names = options.segmenters;
  if (names.empty()) names.push_back(config.segmenter);

  EvaluateResult result;
  for (const std::string& name : names) {
    const Segmenter segmenter = Segmenter::make(config, name);
    std::vector<SegScore> scores(entries.size());
    std::vector<ConfusionCounts> counts(entries.size());
    parallel_for(entries.size(), config.train.workers, [&](std::size_t i) {
      const Image image = load_image(entries[i]->image_path, entries[i]->image_id);
      const BinaryMask truth =
          load_mask(entries[i]->mask_path, image.height(), image.width(), entries[i]->image_id);
      const BinaryMask pred = segmenter.segment(image);
      BinaryMask truth_cropped;
      truth_cropped.bits = truth.bits.topLeftCorner(pred.height(), pred.width());
      truth_cropped.image_id = truth.image_id;
      scores[i] = seg_score(pred, truth_cropped);
      counts[i] = pixel_confusion(pred, truth_cropped);
    });
    result.segmentation.push_back({name, aggregate_seg_scores(scores, counts)});
  }

  std::size_t n_pos = 0, n_neg = 0;
  if (options.classification) {
    const TrainedEnsemble ensemble = TrainedEnsemble::load(config.clf_checkpoint_path());
    const HarvestedPool pool = harvest_split(config, manifest, options.split,
                                             derive_seed(config.train.seed, 0xEu, 0xBu));
    n_pos = pool.positives.size();
    n_neg = pool.negatives.size();
    if (n_pos + n_neg == 0) throw data_error("no regions harvested for classification");

    std::vector<const LabeledRegion*> regions;
    for (const auto& r : pool.positives) regions.push_back(&r);
    for (const auto& r : pool.negatives) regions.push_back(&r);

    std::vector<FeatureVector> features(regions.size());
    parallel_for(regions.size(), config.train.workers, [&](std::size_t i) {
      features[i] = featurize(regions[i]->roi, ensemble.feature_spec_id);
    });

    auto score = [&](auto&& predict, const std::string& method) {
      ConfusionCounts counts;
      for (std::size_t i = 0; i < regions.size(); ++i) {
        const bool truth = regions[i]->label == RegionLabel::bacilli;
        const bool pred = predict(features[i]) == RegionLabel::bacilli;
        if (truth && pred) ++counts.tp;
        else if (truth && !pred) ++counts.fn;
        else if (!truth && pred) ++counts.fp;
        else ++counts.tn;
      }
      result.classification.push_back({method, classification_scores(counts)});
    };
    score([&](const FeatureVector& f) { return ensemble.predict(f); }, "ensemble");
    for (std::size_t k = 0; k < kEnsembleKinds.size(); ++k) {
      const BaseModel& variant = ensemble.individual_variants[k];
      score([&](const FeatureVector& f) { return variant.predict(f); },
            to_string(kEnsembleKinds[k]));
    }
  }

  std::ostringstream text;
  text << "Segmentation (" << split_name(options.split) << " split, " << entries.size()
       << " images)\n\n"
       << render_segmentation_table(result.segmentation);
  if (options.classification)
    text << "\nClassification (harvested regions: " << n_pos << " bacilli / " << n_neg
         << " non-bacilli)\n\n"
         << render_classification_table(result.classification);
  result.report_text = text.str();

  result.report_json = {{"split", split_name(options.split)},
                        {"n_images", entries.size()},
                        {"segmentation", segmentation_records(result.segmentation)}};
  if (options.classification) {
    result.report_json["classification"] = classification_records(result.classification);
    result.report_json["n_regions"] = {{"bacilli", n_pos}, {"non_bacilli", n_neg}};
  }

  write_text_file(config.out_dir / "evaluate_report.txt", result.report_text);
  write_text_file(config.out_dir / "evaluate_report.json", result.report_json.dump(2) + "\n");
  log << result.report_text;
  return result;
}

}  // namespace bacdet
