#pragma once

#include <compare>
#include <string>

namespace faultnav {

// Fully qualified method identity. Canonical text form:
//
//   package$class_name#method_name(param_signature)
//
// where param_signature is a comma-separated list of parameter type names
// with no spaces. Inner classes keep their own '$' separators inside
// class_name; the first '$' always splits package from class. MethodIds are
// totally ordered by their canonical text, which is the tie-breaker used
// everywhere a deterministic order is needed.
struct MethodId {
  std::string package;
  std::string class_name;
  std::string method_name;
  std::string param_signature;

  std::string canonical() const;

  // Parses the canonical form. Throws Error(MalformedLine) on bad input.
  static MethodId parse(const std::string& text);

  // Accepts looser test identifiers as found in tests files:
  // `pkg.Class#method`, `pkg.Class#method(sig)`, or the canonical form.
  static MethodId parse_test_name(const std::string& text);

  bool operator==(const MethodId& other) const = default;
  std::strong_ordering operator<=>(const MethodId& other) const {
    return canonical() <=> other.canonical();
  }
};

}  // namespace faultnav
