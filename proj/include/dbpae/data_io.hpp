#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbpae/nn.hpp"
#include "dbpae/tensor.hpp"

namespace dbpae {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ImageDataset {
  Tensor images;  // [N, D], values in [0,1]
  std::vector<int> labels;
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return images.shape().size() == 2 ? images.shape()[1] : 0; }
};

// Big-endian IDX pair (images magic 2051, labels magic 2049); pixels scaled by 1/255.
ImageDataset load_idx(const std::string& images_path, const std::string& labels_path);
void write_idx(const ImageDataset& ds, const std::string& images_path,
               const std::string& labels_path);

// Seeded class-balanced subset; indices per class are drawn without replacement.
ImageDataset subset_per_class(const ImageDataset& ds, std::size_t per_class, std::uint64_t seed);

// Procedural 28x28 digit glyphs for classes 0..9 with seeded affine jitter.
// Stands in for handwritten digits when no IDX corpus is on disk.
ImageDataset synth_digits(std::size_t per_class, std::uint64_t seed);

Tensor gather_rows(const Tensor& images, std::span<const std::size_t> idx);
Tensor image_row(const Tensor& images, std::size_t i);  // [1, D]

// Binary PGM (P5, maxval 255) tiling square images left-to-right, top-to-bottom.
void write_pgm_grid(const std::string& path, const std::vector<Tensor>& images, std::size_t cols);

// RFC-4180-style CSV with a header row and LF line endings.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);
std::string fmt(double v);  // shortest round-trip decimal

// Manifest + blob checkpoint: "<stem>.manifest" lists names/shapes/offsets and
// metadata; "<stem>.blob" holds the little-endian 64-bit-float payload.
void save_checkpoint(const std::string& stem, const ParamStore& params,
                     const std::map<std::string, std::string>& meta);
struct Checkpoint {
  ParamStore params;
  std::map<std::string, std::string> meta;
};
Checkpoint load_checkpoint(const std::string& stem);

}  // namespace dbpae
