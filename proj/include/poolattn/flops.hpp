#pragma once

#include <cstdint>

namespace poolattn::flops {

// Buckets that mirror the fields of CostReport.
enum class Category { Core, Proj, Pool };

struct Tally {
  std::uint64_t core = 0;
  std::uint64_t proj = 0;
  std::uint64_t pool = 0;
  std::uint64_t total() const noexcept { return core + proj + pool; }
};

// Counting is per thread and only active inside a Recorder scope. Kernels
// call record() with the operation count they actually perform: a
// multiply-accumulate is 2, every exp/div/max/sub/add is 1.
void record(std::uint64_t count);

class Recorder {
 public:
  Recorder();
  ~Recorder();
  Recorder(const Recorder&) = delete;
  Recorder& operator=(const Recorder&) = delete;

  const Tally& tally() const noexcept { return tally_; }

 private:
  friend void record(std::uint64_t);
  friend class CategoryScope;
  Tally tally_;
  Category category_ = Category::Core;
  Recorder* previous_;
};

// Routes records to `category` until destroyed.
class CategoryScope {
 public:
  explicit CategoryScope(Category category);
  ~CategoryScope();
  CategoryScope(const CategoryScope&) = delete;
  CategoryScope& operator=(const CategoryScope&) = delete;

 private:
  Category previous_;
};

}  // namespace poolattn::flops
