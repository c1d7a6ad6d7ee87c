#include "nogap/dataset.hpp"

#include <cmath>

#include "nogap/errors.hpp"

namespace nogap::data {

namespace {

constexpr std::string_view kMetaPrefix = "meta.";

Shape parse_grid(const std::string& text) {
  Shape grid;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find('x', pos);
    const std::string part = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos) {
      throw FormatError("dataset: malformed grid '" + text + "'");
    }
    grid.push_back(std::stoul(part));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return grid;
}

std::string grid_string(const Shape& grid) {
  std::string s;
  for (std::size_t i = 0; i < grid.size(); ++i) s += (i ? "x" : "") + std::to_string(grid[i]);
  return s;
}

}  // namespace

Normalizer fit_normalizer(std::span<const double> values) {
  if (values.empty()) throw ShapeError("fit_normalizer: no values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  const double sd = std::sqrt(var);
  return {mean, sd > 1e-12 * std::max(1.0, std::abs(mean)) ? sd : 1.0};
}

const std::string* Dataset::find_meta(std::string_view key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return &v;
  }
  return nullptr;
}

void Dataset::set_meta(std::string key, std::string value) {
  for (auto& [k, v] : meta) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  meta.emplace_back(std::move(key), std::move(value));
}

void Dataset::validate() const {
  if (grid.empty() || grid.size() > 2) throw ShapeError("dataset: grid must have 1 or 2 axes");
  if (extent.size() != grid.size()) throw ShapeError("dataset: extent does not match grid");
  Shape in = inputs.shape();
  Shape out = outputs.shape();
  if (in.size() != grid.size() + 2 || out.size() != grid.size() + 1) {
    throw ShapeError("dataset: inputs " + shape_to_string(in) + " / outputs " + shape_to_string(out) +
                     " do not match grid " + shape_to_string(grid));
  }
  if (in[0] == 0 || in[0] != out[0]) throw ShapeError("dataset: sample counts differ or are zero");
  for (std::size_t a = 0; a < grid.size(); ++a) {
    if (in[a + 1] != grid[a] || out[a + 1] != grid[a]) {
      throw ShapeError("dataset: axis " + std::to_string(a) + " does not match grid");
    }
  }
  if (input_norm.size() != in.back()) throw ShapeError("dataset: one input normalizer per field required");
  for (const auto& n : input_norm) {
    if (!(n.std > 0.0)) throw DomainError("dataset: normalizer std must be positive");
  }
  if (!(output_norm.std > 0.0)) throw DomainError("dataset: normalizer std must be positive");
}

void fit_normalizers(Dataset& ds) {
  const std::size_t fields = ds.input_fields();
  const std::size_t rows = ds.inputs.size() / fields;
  ds.input_norm.clear();
  std::vector<double> column(rows);
  for (std::size_t f = 0; f < fields; ++f) {
    for (std::size_t r = 0; r < rows; ++r) column[r] = ds.inputs[r * fields + f];
    ds.input_norm.push_back(fit_normalizer(column));
  }
  ds.output_norm = fit_normalizer(ds.outputs.data());
}

Dataset slice_samples(const Dataset& ds, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > ds.size()) throw ShapeError("slice_samples: range out of bounds");
  Dataset out = ds;
  auto cut = [&](const Tensor& t) {
    const std::size_t per = t.size() / t.dim(0);
    Shape s = t.shape();
    s[0] = count;
    auto first = t.data().begin() + static_cast<std::ptrdiff_t>(begin * per);
    return Tensor::computed(s, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * per)));
  };
  out.inputs = cut(ds.inputs);
  out.outputs = cut(ds.outputs);
  return out;
}

io::Container to_container(const Dataset& ds) {
  ds.validate();
  io::Container c;
  c.magic = std::string(io::kDatasetMagic);
  c.set_meta("problem", ds.problem);
  c.set_meta("grid", grid_string(ds.grid));
  for (const auto& [k, v] : ds.meta) c.set_meta(std::string(kMetaPrefix) + k, v);
  c.add_tensor("inputs", ds.inputs);
  c.add_tensor("outputs", ds.outputs);
  std::vector<double> ext;
  for (const auto& [lo, hi] : ds.extent) {
    ext.push_back(lo);
    ext.push_back(hi);
  }
  c.add_tensor("grid/extent", Tensor({ds.extent.size(), 2}, ext));
  std::vector<double> in_norm;
  for (const auto& n : ds.input_norm) {
    in_norm.push_back(n.mean);
    in_norm.push_back(n.std);
  }
  c.add_tensor("norm/input", Tensor({ds.input_norm.size(), 2}, in_norm));
  c.add_tensor("norm/output", Tensor({2}, {ds.output_norm.mean, ds.output_norm.std}));
  return c;
}

Dataset from_container(const io::Container& c) {
  Dataset ds;
  ds.problem = c.meta("problem");
  ds.grid = parse_grid(c.meta("grid"));
  for (const auto& [k, v] : c.metadata) {
    if (k.starts_with(kMetaPrefix)) ds.meta.emplace_back(k.substr(kMetaPrefix.size()), v);
  }
  ds.inputs = c.tensor("inputs");
  ds.outputs = c.tensor("outputs");
  const Tensor& ext = c.tensor("grid/extent");
  if (ext.rank() != 2 || ext.dim(1) != 2) throw FormatError("dataset: malformed extent");
  for (std::size_t a = 0; a < ext.dim(0); ++a) ds.extent.emplace_back(ext[2 * a], ext[2 * a + 1]);
  const Tensor& in_norm = c.tensor("norm/input");
  if (in_norm.rank() != 2 || in_norm.dim(1) != 2) throw FormatError("dataset: malformed input normalizers");
  for (std::size_t f = 0; f < in_norm.dim(0); ++f) ds.input_norm.push_back({in_norm[2 * f], in_norm[2 * f + 1]});
  const Tensor& out_norm = c.tensor("norm/output");
  if (out_norm.size() != 2) throw FormatError("dataset: malformed output normalizer");
  ds.output_norm = {out_norm[0], out_norm[1]};
  try {
    ds.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("dataset: inconsistent contents: ") + e.what());
  }
  return ds;
}

void dataset_write(const Dataset& ds, const std::filesystem::path& path) {
  io::write_file(path, to_container(ds));
}

Dataset dataset_read(const std::filesystem::path& path) {
  return from_container(io::read_file(path, io::kDatasetMagic));
}

}  // namespace nogap::data
