#include "rcmcl/dataset_io.hpp"

#include <cstring>
#include <fstream>

#include "rcmcl/checkpoint.hpp"
#include "rcmcl/error.hpp"
#include "rcmcl/json_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rcmcl {

namespace {

constexpr char kLabelMagic[4] = {'R', 'C', 'L', '1'};

void write_labels(const fs::path& path, const std::vector<int>& labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kLabelMagic, 4);
  write_u64(os, labels.size());
  for (int l : labels) {
    const auto u = static_cast<std::uint32_t>(l);
    const unsigned char b[4] = {static_cast<unsigned char>(u), static_cast<unsigned char>(u >> 8),
                                static_cast<unsigned char>(u >> 16), static_cast<unsigned char>(u >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
  }
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<int> read_labels(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kLabelMagic, 4) != 0) throw IoError(path.string() + ": bad label file magic");
  const std::uint64_t n = read_u64(is);
  std::vector<int> labels;
  labels.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError(path.string() + ": truncated label file");
    const std::uint32_t u = b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    labels.push_back(static_cast<int>(u));
  }
  return labels;
}

}  // namespace

LabeledSet StoredDataset::train() const {
  if (!split) throw ConfigError("dataset has no stored split");
  return dataset.samples.subset(split->ids.train);
}

LabeledSet StoredDataset::test() const {
  if (!split) throw ConfigError("dataset has no stored split");
  return dataset.samples.subset(split->ids.test);
}

void save_dataset(const fs::path& dir, const Dataset& ds, const std::optional<DatasetSplit>& split,
                  const json& extra) {
  ds.samples.inputs.validate();
  json manifest = {{"format", "rcmcl-dataset"},
                   {"version", 1},
                   {"generator", to_json(ds.spec)},
                   {"num_samples", ds.samples.size()},
                   {"num_classes", ds.samples.num_classes},
                   {"ids", ds.samples.inputs.ids}};
  if (split) {
    manifest["split"] = {{"train_fraction", split->train_fraction},
                         {"seed", split->seed},
                         {"train", split->ids.train},
                         {"test", split->ids.test}};
  }
  for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();
  write_directory_atomically(dir, [&](const fs::path& tmp) {
    for (Modality m : kModalities) {
      save_matrix(tmp / (std::string(modality_name(m)) + ".rcm"), ds.samples.inputs.block(m));
    }
    write_labels(tmp / "labels.bin", ds.samples.labels);
    std::ofstream os(tmp / "manifest.json", std::ios::binary);
    os << manifest.dump(2) << '\n';
    if (!os) throw IoError("failed writing dataset manifest");
  });
}

StoredDataset load_dataset(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw IoError("dataset: cannot open " + (dir / "manifest.json").string());
  StoredDataset out;
  try {
    out.manifest = json::parse(is);
    if (out.manifest.value("format", "") != "rcmcl-dataset") throw IoError("dataset: wrong format tag");
    out.dataset.spec = generator_spec_from_json(out.manifest.at("generator"));
    auto& set = out.dataset.samples;
    set.num_classes = out.manifest.at("num_classes").get<int>();
    set.labels = read_labels(dir / "labels.bin");
    set.inputs.shape = out.dataset.spec.shape();
    for (Modality m : kModalities) {
      set.inputs.block(m) = load_matrix(dir / (std::string(modality_name(m)) + ".rcm"));
    }
    set.inputs.ids = out.manifest.at("ids").get<std::vector<std::uint64_t>>();
    set.inputs.availability.assign(set.inputs.ids.size(), kAllAvailable);
    if (set.labels.size() != set.inputs.ids.size()) throw IoError("dataset: label count does not match ids");
    set.inputs.validate();
    if (out.manifest.contains("split")) {
      const auto& s = out.manifest["split"];
      DatasetSplit sp;
      sp.train_fraction = s.at("train_fraction").get<double>();
      sp.seed = s.at("seed").get<std::uint64_t>();
      sp.ids.train = s.at("train").get<std::vector<std::size_t>>();
      sp.ids.test = s.at("test").get<std::vector<std::size_t>>();
      for (auto ids : {&sp.ids.train, &sp.ids.test}) {
        for (std::size_t i : *ids) {
          if (i >= set.size()) throw IoError("dataset: split index out of range");
        }
      }
      out.split = std::move(sp);
    }
  } catch (const json::exception& e) {
    throw IoError("dataset: invalid manifest: " + std::string(e.what()));
  } catch (const ShapeError& e) {
    throw IoError("dataset: " + std::string(e.what()));
  }
  return out;
}

}  // namespace rcmcl
