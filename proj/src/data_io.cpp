#include "dbpae/data_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dbpae/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are written as native little-endian doubles");

namespace dbpae {

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

constexpr std::uint32_t kImagesMagic = 0x00000803;  // 2051
constexpr std::uint32_t kLabelsMagic = 0x00000801;  // 2049

}  // namespace

ImageDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path);
  std::uint32_t magic = read_be32(img, images_path);
  if (magic != kImagesMagic)
    throw IoError("bad magic in " + images_path + ": expected " + std::to_string(kImagesMagic) +
                  ", got " + std::to_string(magic));
  std::uint32_t count = read_be32(img, images_path);
  std::uint32_t rows = read_be32(img, images_path);
  std::uint32_t cols = read_be32(img, images_path);
  std::size_t dim = std::size_t(rows) * cols;
  std::vector<unsigned char> raw(std::size_t(count) * dim);
  if (!img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size())))
    throw IoError("truncated file: " + images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels_path);
  magic = read_be32(lab, labels_path);
  if (magic != kLabelsMagic)
    throw IoError("bad magic in " + labels_path + ": expected " + std::to_string(kLabelsMagic) +
                  ", got " + std::to_string(magic));
  std::uint32_t lcount = read_be32(lab, labels_path);
  if (lcount != count)
    throw IoError("count mismatch: " + std::to_string(count) + " images vs " +
                  std::to_string(lcount) + " labels");
  std::vector<unsigned char> lraw(lcount);
  if (!lab.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(lraw.size())))
    throw IoError("truncated file: " + labels_path);

  std::vector<double> pixels(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) pixels[i] = raw[i] / 255.0;
  for (double p : pixels)
    if (p < 0.0 || p > 1.0) throw IoError("pixel out of range after scaling in " + images_path);
  ImageDataset ds;
  ds.images = Tensor({count, dim}, std::move(pixels));
  ds.labels.assign(lraw.begin(), lraw.end());
  ds.provenance = images_path;
  return ds;
}

void write_idx(const ImageDataset& ds, const std::string& images_path,
               const std::string& labels_path) {
  std::size_t n = ds.size(), dim = ds.dim();
  std::size_t side = static_cast<std::size_t>(std::lround(std::sqrt(double(dim))));
  if (side * side != dim) throw IoError("write_idx: images are not square");
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw IoError("cannot open " + images_path + " for writing");
  write_be32(img, kImagesMagic);
  write_be32(img, static_cast<std::uint32_t>(n));
  write_be32(img, static_cast<std::uint32_t>(side));
  write_be32(img, static_cast<std::uint32_t>(side));
  auto data = ds.images.data();
  std::vector<unsigned char> raw(n * dim);
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<unsigned char>(
        std::lround(std::clamp(data[i], 0.0, 1.0) * 255.0));
  img.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!img) throw IoError("write failed: " + images_path);

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("cannot open " + labels_path + " for writing");
  write_be32(lab, kLabelsMagic);
  write_be32(lab, static_cast<std::uint32_t>(n));
  std::vector<unsigned char> lraw(n);
  for (std::size_t i = 0; i < n; ++i) lraw[i] = static_cast<unsigned char>(ds.labels[i]);
  lab.write(reinterpret_cast<const char*>(lraw.data()), static_cast<std::streamsize>(lraw.size()));
  if (!lab) throw IoError("write failed: " + labels_path);
}

Tensor gather_rows(const Tensor& images, std::span<const std::size_t> idx) {
  std::size_t dim = images.cols();
  std::vector<double> out(idx.size() * dim);
  auto src = images.data();
  for (std::size_t r = 0; r < idx.size(); ++r)
    std::memcpy(out.data() + r * dim, src.data() + idx[r] * dim, dim * sizeof(double));
  return Tensor({idx.size(), dim}, std::move(out));
}

Tensor image_row(const Tensor& images, std::size_t i) {
  std::size_t one[] = {i};
  return gather_rows(images, one);
}

ImageDataset subset_per_class(const ImageDataset& ds, std::size_t per_class, std::uint64_t seed) {
  int num_classes = 0;
  for (int l : ds.labels) num_classes = std::max(num_classes, l + 1);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  std::vector<std::size_t> pick;
  std::vector<int> labels;
  for (int c = 0; c < num_classes; ++c) {
    auto& pool = by_class[static_cast<std::size_t>(c)];
    if (pool.size() < per_class)
      throw std::invalid_argument("subset: class " + std::to_string(c) + " has only " +
                                  std::to_string(pool.size()) + " examples, need " +
                                  std::to_string(per_class));
    Rng rng(seed, static_cast<std::uint64_t>(c));
    rng.shuffle(pool);
    for (std::size_t i = 0; i < per_class; ++i) {
      pick.push_back(pool[i]);
      labels.push_back(c);
    }
  }
  ImageDataset out;
  out.images = gather_rows(ds.images, pick);
  out.labels = std::move(labels);
  out.provenance =
      ds.provenance + " subset(per_class=" + std::to_string(per_class) +
      ",seed=" + std::to_string(seed) + ")";
  return out;
}

// ---- synthetic digits ----

namespace {

struct Pt {
  double x, y;
};
using Stroke = std::vector<Pt>;

Stroke arc(double cx, double cy, double rx, double ry, double a0_deg, double a1_deg, int n = 14) {
  Stroke s;
  for (int i = 0; i <= n; ++i) {
    double a = (a0_deg + (a1_deg - a0_deg) * i / n) * std::numbers::pi / 180.0;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

// Angles: 0 deg points right, 90 deg points down (y grows downward).
std::vector<Stroke> digit_strokes(int d) {
  switch (d) {
    case 0: return {arc(0.5, 0.5, 0.21, 0.3, 0, 360, 24)};
    case 1: return {{{0.38, 0.3}, {0.53, 0.18}}, {{0.53, 0.18}, {0.53, 0.82}}};
    case 2: {
      auto top = arc(0.5, 0.34, 0.19, 0.16, 180, 340);
      top.push_back({0.68, 0.38});
      top.push_back({0.32, 0.8});
      return {top, {{0.32, 0.8}, {0.7, 0.8}}};
    }
    case 3: return {arc(0.47, 0.33, 0.17, 0.15, 210, 90), arc(0.47, 0.64, 0.19, 0.17, 270, 150)};
    case 4:
      return {{{0.6, 0.18}, {0.3, 0.6}, {0.74, 0.6}}, {{0.62, 0.42}, {0.62, 0.84}}};
    case 5: {
      return {{{0.68, 0.2}, {0.36, 0.2}, {0.34, 0.47}},
              arc(0.49, 0.62, 0.19, 0.18, 250, 90),
              {{0.3, 0.775}, {0.34, 0.77}}};
    }
    case 6: {
      Stroke spine = arc(0.74, 0.52, 0.42, 0.34, 215, 180);
      return {spine, arc(0.5, 0.63, 0.17, 0.16, 0, 360, 20)};
    }
    case 7: return {{{0.3, 0.2}, {0.7, 0.2}, {0.44, 0.82}}};
    case 8: return {arc(0.5, 0.33, 0.15, 0.14, 0, 360, 20), arc(0.5, 0.65, 0.18, 0.17, 0, 360, 20)};
    case 9: return {arc(0.48, 0.36, 0.16, 0.15, 0, 360, 20), {{0.64, 0.36}, {0.58, 0.82}}};
    default: throw std::invalid_argument("digit_strokes: class out of range");
  }
}

double seg_dist(Pt p, Pt a, Pt b) {
  double vx = b.x - a.x, vy = b.y - a.y;
  double wx = p.x - a.x, wy = p.y - a.y;
  double vv = vx * vx + vy * vy;
  double t = vv > 0 ? std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0) : 0.0;
  double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

ImageDataset synth_digits(std::size_t per_class, std::uint64_t seed) {
  const std::size_t side = 28, dim = side * side;
  std::vector<double> pixels;
  pixels.reserve(10 * per_class * dim);
  std::vector<int> labels;
  Rng rng(seed, 17);

  for (int cls = 0; cls < 10; ++cls) {
    auto base = digit_strokes(cls);
    for (std::size_t s = 0; s < per_class; ++s) {
      double theta = rng.uniform(-0.12, 0.12);
      double sx = rng.uniform(0.88, 1.1), sy = rng.uniform(0.88, 1.1);
      double shear = rng.uniform(-0.12, 0.12);
      double tx = rng.uniform(-0.05, 0.05), ty = rng.uniform(-0.05, 0.05);
      double radius = rng.uniform(0.038, 0.055);
      double bright = rng.uniform(0.85, 1.0);
      double ct = std::cos(theta), st = std::sin(theta);

      std::vector<Stroke> strokes = base;
      for (auto& stroke : strokes) {
        for (auto& p : stroke) {
          double x = (p.x - 0.5) * sx, y = (p.y - 0.5) * sy;
          x += shear * y;
          double xr = ct * x - st * y, yr = st * x + ct * y;
          p = {xr + 0.5 + tx, yr + 0.5 + ty};
        }
      }

      for (std::size_t py = 0; py < side; ++py) {
        for (std::size_t px = 0; px < side; ++px) {
          Pt q{(px + 0.5) / side, (py + 0.5) / side};
          double d = 1e9;
          for (const auto& stroke : strokes)
            for (std::size_t i = 0; i + 1 < stroke.size(); ++i)
              d = std::min(d, seg_dist(q, stroke[i], stroke[i + 1]));
          double v = std::clamp((radius - d) / 0.025 + 0.5, 0.0, 1.0) * bright;
          pixels.push_back(v);
        }
      }
      labels.push_back(cls);
    }
  }
  ImageDataset ds;
  ds.images = Tensor({10 * per_class, dim}, std::move(pixels));
  ds.labels = std::move(labels);
  ds.provenance = "synth_digits(per_class=" + std::to_string(per_class) +
                  ",seed=" + std::to_string(seed) + ")";
  return ds;
}

// ---- emitters ----

void write_pgm_grid(const std::string& path, const std::vector<Tensor>& images,
                    std::size_t cols) {
  if (images.empty() || cols == 0) throw std::invalid_argument("write_pgm_grid: nothing to write");
  std::size_t dim = images[0].size();
  std::size_t side = static_cast<std::size_t>(std::lround(std::sqrt(double(dim))));
  if (side * side != dim) throw std::invalid_argument("write_pgm_grid: images are not square");
  std::size_t rows = (images.size() + cols - 1) / cols;
  std::size_t w = cols * side, h = rows * side;
  std::vector<unsigned char> canvas(w * h, 0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].size() != dim) throw std::invalid_argument("write_pgm_grid: mixed image sizes");
    auto img = images[i].data();
    std::size_t gx = (i % cols) * side, gy = (i / cols) * side;
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x)
        canvas[(gy + y) * w + gx + x] = static_cast<unsigned char>(
            std::lround(std::clamp(img[y * side + x], 0.0, 1.0) * 255.0));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "P5\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(canvas.data()),
            static_cast<std::streamsize>(canvas.size()));
  if (!out) throw IoError("write failed: " + path);
}

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {
std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}
}  // namespace

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out << ',';
      out << csv_escape(cells[i]);
    }
    out << '\n';
  };
  emit(header);
  for (const auto& r : rows) emit(r);
  if (!out) throw IoError("write failed: " + path);
}

// ---- checkpoints ----

void save_checkpoint(const std::string& stem, const ParamStore& params,
                     const std::map<std::string, std::string>& meta) {
  std::ofstream man(stem + ".manifest", std::ios::binary);
  if (!man) throw IoError("cannot open " + stem + ".manifest for writing");
  std::ofstream blob(stem + ".blob", std::ios::binary);
  if (!blob) throw IoError("cannot open " + stem + ".blob for writing");

  man << "dbpae-checkpoint 1\n";
  for (const auto& [k, v] : meta) man << "meta " << k << ' ' << v << '\n';
  std::size_t offset = 0;
  for (const auto& name : params.names()) {
    const Tensor& t = params.at(name);
    man << "param " << name << ' ' << t.shape().size();
    for (std::size_t e : t.shape()) man << ' ' << e;
    man << ' ' << offset << '\n';
    auto d = t.data();
    blob.write(reinterpret_cast<const char*>(d.data()),
               static_cast<std::streamsize>(d.size() * sizeof(double)));
    offset += d.size() * sizeof(double);
  }
  if (!man || !blob) throw IoError("write failed: " + stem);
}

Checkpoint load_checkpoint(const std::string& stem) {
  std::ifstream man(stem + ".manifest");
  if (!man) throw IoError("cannot open " + stem + ".manifest (missing checkpoint?)");
  std::string line;
  if (!std::getline(man, line) || line != "dbpae-checkpoint 1")
    throw IoError("unsupported checkpoint format in " + stem + ".manifest");

  std::ifstream blob(stem + ".blob", std::ios::binary);
  if (!blob) throw IoError("cannot open " + stem + ".blob");
  std::vector<char> raw((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());

  Checkpoint ck;
  std::size_t expect_offset = 0;
  while (std::getline(man, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string kind;
    is >> kind;
    if (kind == "meta") {
      std::string key;
      is >> key;
      std::string value;
      std::getline(is, value);
      if (!value.empty() && value[0] == ' ') value.erase(0, 1);
      ck.meta[key] = value;
    } else if (kind == "param") {
      std::string name;
      std::size_t rank;
      is >> name >> rank;
      Shape shape(rank);
      for (auto& e : shape) is >> e;
      std::size_t offset;
      is >> offset;
      if (!is) throw IoError("malformed manifest line in " + stem + ".manifest: " + line);
      if (offset != expect_offset)
        throw IoError("overlapping or out-of-order offsets in " + stem + ".manifest");
      std::size_t count = shape_size(shape);
      std::size_t bytes = count * sizeof(double);
      if (offset + bytes > raw.size()) throw IoError("blob too short for " + name);
      std::vector<double> vals(count);
      std::memcpy(vals.data(), raw.data() + offset, bytes);
      ck.params.insert(name, Tensor(std::move(shape), std::move(vals)));
      expect_offset = offset + bytes;
    } else {
      throw IoError("unknown manifest entry in " + stem + ".manifest: " + line);
    }
  }
  if (expect_offset != raw.size())
    throw IoError("blob length does not match manifest in " + stem);
  return ck;
}

}  // namespace dbpae
