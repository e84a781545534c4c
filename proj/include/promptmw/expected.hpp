// Copyright 2026 The promptmw Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef PROMPTMW_EXPECTED_HPP_
#define PROMPTMW_EXPECTED_HPP_

#include <optional>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <variant>

namespace promptmw {

// A minimal value-or-error holder. Errors never cross module boundaries as
// exceptions; every fallible operation returns one of these.
template <typename E>
struct Unexpected {
  E error;
};

template <typename E>
Unexpected<std::decay_t<E>> make_unexpected(E&& error) {
  return {std::forward<E>(error)};
}

class BadExpectedAccess : public std::logic_error {
 public:
  BadExpectedAccess() : std::logic_error("accessed the wrong alternative") {}
};

template <typename T, typename E>
class [[nodiscard]] Expected {
 public:
  using value_type = T;
  using error_type = E;

  Expected(const T& value) : storage_(std::in_place_index<0>, value) {}
  Expected(T&& value) : storage_(std::in_place_index<0>, std::move(value)) {}
  template <typename G>
  Expected(Unexpected<G> unexpected)
      : storage_(std::in_place_index<1>, std::move(unexpected.error)) {}

  bool has_value() const noexcept { return storage_.index() == 0; }
  explicit operator bool() const noexcept { return has_value(); }

  T& value() & {
    if (!has_value()) throw BadExpectedAccess();
    return std::get<0>(storage_);
  }
  const T& value() const& {
    if (!has_value()) throw BadExpectedAccess();
    return std::get<0>(storage_);
  }
  T&& value() && {
    if (!has_value()) throw BadExpectedAccess();
    return std::get<0>(std::move(storage_));
  }

  E& error() & {
    if (has_value()) throw BadExpectedAccess();
    return std::get<1>(storage_);
  }
  const E& error() const& {
    if (has_value()) throw BadExpectedAccess();
    return std::get<1>(storage_);
  }

  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }
  T&& operator*() && { return std::move(*this).value(); }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }

 private:
  std::variant<T, E> storage_;
};

template <typename E>
class [[nodiscard]] Expected<void, E> {
 public:
  Expected() = default;
  template <typename G>
  Expected(Unexpected<G> unexpected) : error_(std::move(unexpected.error)) {}

  bool has_value() const noexcept { return !error_.has_value(); }
  explicit operator bool() const noexcept { return has_value(); }

  const E& error() const {
    if (has_value()) throw BadExpectedAccess();
    return *error_;
  }

 private:
  std::optional<E> error_;
};

}  // namespace promptmw

#endif  // PROMPTMW_EXPECTED_HPP_
