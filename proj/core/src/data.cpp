#include "fliplog/data.hpp"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <utility>

#include "fliplog/errors.hpp"
#include "fliplog/rng.hpp"

#define CPPHTTPLIB_NO_EXCEPTIONS
#include <httplib.h>

namespace fliplog {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in,
                                 const std::string& path) {
  z_stream zs{};
  // 15 + 32: accept both zlib and gzip wrappers.
  if (inflateInit2(&zs, 15 + 32) != Z_OK) {
    throw FormatError("zlib init failed for '" + path + "'");
  }
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 16);
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw FormatError("corrupt gzip stream in '" + path + "'");
    }
    out.insert(out.end(), chunk.data(),
               chunk.data() + (chunk.size() - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> read_maybe_gzip(const std::string& path) {
  std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) {
    return gunzip(bytes, path);
  }
  return bytes;
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& bytes,
                        std::size_t offset) {
  return (std::uint32_t(bytes[offset]) << 24) |
         (std::uint32_t(bytes[offset + 1]) << 16) |
         (std::uint32_t(bytes[offset + 2]) << 8) |
         std::uint32_t(bytes[offset + 3]);
}

}  // namespace

IdxImages load_idx_images(const std::string& path) {
  std::vector<std::uint8_t> bytes = read_maybe_gzip(path);
  if (bytes.size() < 16) throw FormatError("'" + path + "': truncated IDX header");
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kImageMagic) {
    throw FormatError("'" + path + "': bad image magic " + std::to_string(magic));
  }
  IdxImages idx;
  idx.count = read_be32(bytes, 4);
  idx.rows = static_cast<int>(read_be32(bytes, 8));
  idx.cols = static_cast<int>(read_be32(bytes, 12));
  if (idx.rows != 28 || idx.cols != 28) {
    throw ShapeError("'" + path + "': unsupported image size " +
                     std::to_string(idx.rows) + "x" + std::to_string(idx.cols) +
                     ", expected 28x28");
  }
  const std::size_t expected = 16 + static_cast<std::size_t>(idx.count) * 28 * 28;
  if (bytes.size() != expected) {
    throw FormatError("'" + path + "': payload is " +
                      std::to_string(bytes.size() - 16) + " bytes, expected " +
                      std::to_string(expected - 16));
  }
  idx.pixels.assign(bytes.begin() + 16, bytes.end());
  return idx;
}

std::vector<std::uint8_t> load_idx_labels(const std::string& path) {
  std::vector<std::uint8_t> bytes = read_maybe_gzip(path);
  if (bytes.size() < 8) throw FormatError("'" + path + "': truncated IDX header");
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kLabelMagic) {
    throw FormatError("'" + path + "': bad label magic " + std::to_string(magic));
  }
  const std::uint32_t count = read_be32(bytes, 4);
  if (bytes.size() != 8 + static_cast<std::size_t>(count)) {
    throw FormatError("'" + path + "': payload is " +
                      std::to_string(bytes.size() - 8) + " bytes, expected " +
                      std::to_string(count));
  }
  std::vector<std::uint8_t> labels(bytes.begin() + 8, bytes.end());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 9) {
      throw FormatError("'" + path + "': label " + std::to_string(labels[i]) +
                        " at index " + std::to_string(i) + " out of range 0-9");
    }
  }
  return labels;
}

ImageSet load_image_set(const std::string& images_path,
                        const std::string& labels_path, std::string source) {
  IdxImages idx = load_idx_images(images_path);
  std::vector<std::uint8_t> labels = load_idx_labels(labels_path);
  if (idx.count != static_cast<std::int64_t>(labels.size())) {
    throw FormatError("image count " + std::to_string(idx.count) +
                      " != label count " + std::to_string(labels.size()));
  }
  ImageSet set;
  set.source = std::move(source);
  set.images = Tensor({idx.count, 1, 28, 28});
  auto dst = set.images.data();
  for (std::size_t i = 0; i < idx.pixels.size(); ++i) {
    dst[i] = static_cast<double>(idx.pixels[i]) / 255.0;
  }
  set.labels.assign(labels.begin(), labels.end());
  return set;
}

ImageSet gather(const ImageSet& set, const std::vector<std::int64_t>& indices) {
  ImageSet out;
  out.source = set.source;
  out.images = Tensor({static_cast<std::int64_t>(indices.size()), 1, 28, 28});
  out.labels.reserve(indices.size());
  auto src = set.images.data();
  auto dst = out.images.data();
  constexpr std::int64_t kPlane = 28 * 28;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::int64_t idx = indices[i];
    std::memcpy(dst.data() + static_cast<std::int64_t>(i) * kPlane,
                src.data() + idx * kPlane, kPlane * sizeof(double));
    out.labels.push_back(set.labels[static_cast<std::size_t>(idx)]);
  }
  return out;
}

AnomalyTask make_task(const ImageSet& train, const ImageSet& test,
                      int normal_class, std::int64_t train_cap,
                      std::uint64_t cap_seed) {
  if (normal_class < 0 || normal_class > 9) {
    throw ContractError("normal_class must be in 0..9, got " +
                        std::to_string(normal_class));
  }
  std::vector<std::int64_t> keep;
  for (std::size_t i = 0; i < train.labels.size(); ++i) {
    if (train.labels[i] == normal_class) keep.push_back(static_cast<std::int64_t>(i));
  }
  if (keep.empty()) {
    throw ContractError("no training samples of class " +
                        std::to_string(normal_class) + " in " + train.source);
  }
  if (train_cap > 0 && train_cap < static_cast<std::int64_t>(keep.size())) {
    Xoshiro256ss rng(cap_seed);
    shuffle(keep, rng);
    keep.resize(static_cast<std::size_t>(train_cap));
  }

  AnomalyTask task;
  task.normal_class = normal_class;
  task.id = train.source + "/class" + std::to_string(normal_class);
  task.train_normal = gather(train, keep);
  task.test_all.source = test.source;
  task.test_all.images = test.images;  // shared storage, read-only
  task.test_all.labels.reserve(test.labels.size());
  for (int label : test.labels) {
    task.test_all.labels.push_back(label == normal_class ? 0 : 1);
  }
  return task;
}

namespace {

std::string resolve_idx_file(const std::filesystem::path& dir,
                             const std::string& stem,
                             std::vector<std::string>& missing) {
  const std::filesystem::path plain = dir / stem;
  if (std::filesystem::exists(plain)) return plain.string();
  const std::filesystem::path gz = dir / (stem + ".gz");
  if (std::filesystem::exists(gz)) return gz.string();
  missing.push_back(plain.string() + "[.gz]");
  return {};
}

constexpr const char* kIdxStems[4] = {
    "train-images-idx3-ubyte", "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"};

}  // namespace

DatasetPaths dataset_paths(const std::string& data_dir,
                           const std::string& dataset) {
  if (dataset != "mnist" && dataset != "fmnist") {
    throw ContractError("unknown dataset '" + dataset + "' (mnist|fmnist)");
  }
  const std::filesystem::path dir = std::filesystem::path(data_dir) / dataset;
  std::vector<std::string> missing;
  DatasetPaths paths;
  paths.train_images = resolve_idx_file(dir, kIdxStems[0], missing);
  paths.train_labels = resolve_idx_file(dir, kIdxStems[1], missing);
  paths.test_images = resolve_idx_file(dir, kIdxStems[2], missing);
  paths.test_labels = resolve_idx_file(dir, kIdxStems[3], missing);
  if (!missing.empty()) {
    std::string msg = "missing dataset files:";
    for (const auto& m : missing) msg += " " + m;
    msg += " (run the fetch command or place the IDX files there)";
    throw FormatError(msg);
  }
  return paths;
}

DatasetSplits load_dataset(const std::string& data_dir,
                           const std::string& dataset) {
  DatasetPaths paths = dataset_paths(data_dir, dataset);
  DatasetSplits splits;
  splits.train = load_image_set(paths.train_images, paths.train_labels,
                                dataset + "/train");
  splits.test = load_image_set(paths.test_images, paths.test_labels,
                               dataset + "/test");
  return splits;
}

std::string default_mirror(const std::string& dataset) {
  if (dataset == "mnist") return "http://ossci-datasets.s3.amazonaws.com/mnist";
  if (dataset == "fmnist") {
    return "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com";
  }
  throw ContractError("unknown dataset '" + dataset + "' (mnist|fmnist)");
}

void fetch_dataset(const std::string& dataset, const std::string& data_dir,
                   const std::string& mirror_url) {
  if (dataset != "mnist" && dataset != "fmnist") {
    throw ContractError("unknown dataset '" + dataset + "' (mnist|fmnist)");
  }
  // Split http://host[:port][/prefix].
  std::string url = mirror_url;
  if (url.rfind("http://", 0) != 0) {
    throw ContractError("mirror must be an http:// URL, got '" + url + "'");
  }
  url = url.substr(7);
  std::string prefix;
  if (const auto slash = url.find('/'); slash != std::string::npos) {
    prefix = url.substr(slash);
    url = url.substr(0, slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  }

  const std::filesystem::path dir = std::filesystem::path(data_dir) / dataset;
  std::filesystem::create_directories(dir);

  httplib::Client client(url);
  client.set_follow_location(true);
  client.set_read_timeout(120, 0);
  for (const char* stem : kIdxStems) {
    const std::string remote = prefix + "/" + stem + ".gz";
    auto res = client.Get(remote);
    if (!res || res->status != 200) {
      throw FormatError("download failed for " + mirror_url + "/" + stem +
                        ".gz (status " +
                        (res ? std::to_string(res->status) : "none") + ")");
    }
    std::ofstream out(dir / (std::string(stem) + ".gz"), std::ios::binary);
    out.write(res->body.data(), static_cast<std::streamsize>(res->body.size()));
  }

  // Verify decompressed payload lengths via a full structural parse.
  DatasetSplits splits = load_dataset(data_dir, dataset);
  if (splits.train.size() != 60000 || splits.test.size() != 10000) {
    throw FormatError("fetched " + dataset + " has unexpected split sizes " +
                      std::to_string(splits.train.size()) + "/" +
                      std::to_string(splits.test.size()));
  }
}

}  // namespace fliplog
