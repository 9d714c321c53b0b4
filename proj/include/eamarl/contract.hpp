#pragma once

#include <stdexcept>
#include <string>

namespace eamarl {

// Thrown when a documented precondition is violated by the caller.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

}  // namespace eamarl
