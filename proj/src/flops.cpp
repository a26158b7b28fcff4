#include "poolattn/flops.hpp"

namespace poolattn::flops {

namespace {
thread_local Recorder* active = nullptr;
}

void record(std::uint64_t count) {
  if (active == nullptr) return;
  switch (active->category_) {
    case Category::Core: active->tally_.core += count; break;
    case Category::Proj: active->tally_.proj += count; break;
    case Category::Pool: active->tally_.pool += count; break;
  }
}

Recorder::Recorder() : previous_(active) { active = this; }

Recorder::~Recorder() { active = previous_; }

CategoryScope::CategoryScope(Category category)
    : previous_(active != nullptr ? active->category_ : Category::Core) {
  if (active != nullptr) active->category_ = category;
}

CategoryScope::~CategoryScope() {
  if (active != nullptr) active->category_ = previous_;
}

}  // namespace poolattn::flops
