// Debug allocation counter. Linking alloc_counter.cpp replaces the global
// operator new; allocations are only counted on threads that armed it.
#pragma once

#include <cstddef>

namespace rbs::test {

void arm_allocation_counter(bool on);
std::size_t allocation_count();

struct CountAllocations {
  CountAllocations() { arm_allocation_counter(true); }
  ~CountAllocations() { arm_allocation_counter(false); }
  CountAllocations(const CountAllocations&) = delete;
  CountAllocations& operator=(const CountAllocations&) = delete;
};

}  // namespace rbs::test
