#include "faultnav/method_id.hpp"

#include <algorithm>

#include "faultnav/errors.hpp"

namespace faultnav {

namespace {

std::string strip_spaces(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (c != ' ' && c != '\t') out.push_back(c);
  }
  return out;
}

}  // namespace

std::string MethodId::canonical() const {
  std::string out;
  out.reserve(package.size() + class_name.size() + method_name.size() +
              param_signature.size() + 4);
  out += package;
  out += '$';
  out += class_name;
  out += '#';
  out += method_name;
  out += '(';
  out += param_signature;
  out += ')';
  return out;
}

MethodId MethodId::parse(const std::string& text) {
  auto hash = text.find('#');
  if (hash == std::string::npos)
    raise(ErrorCode::MalformedLine, "method id missing '#': " + text);
  auto dollar = text.find('$');
  if (dollar == std::string::npos || dollar > hash)
    raise(ErrorCode::MalformedLine, "method id missing '$' before '#': " + text);
  auto open = text.find('(', hash);
  if (open == std::string::npos || text.back() != ')')
    raise(ErrorCode::MalformedLine, "method id missing parameter list: " + text);

  MethodId id;
  id.package = text.substr(0, dollar);
  id.class_name = text.substr(dollar + 1, hash - dollar - 1);
  id.method_name = text.substr(hash + 1, open - hash - 1);
  id.param_signature = strip_spaces(text.substr(open + 1, text.size() - open - 2));
  if (id.class_name.empty() || id.method_name.empty())
    raise(ErrorCode::MalformedLine, "method id with empty class or method: " + text);
  return id;
}

MethodId MethodId::parse_test_name(const std::string& text) {
  std::string t = text;
  if (t.find('(') == std::string::npos) t += "()";
  if (t.find('$') == std::string::npos || t.find('$') > t.find('#')) {
    // dotted form: split package/class at the last '.' before '#'
    auto hash = t.find('#');
    if (hash == std::string::npos)
      raise(ErrorCode::MalformedLine, "test name missing '#': " + text);
    auto dot = t.rfind('.', hash);
    if (dot == std::string::npos) {
      t = "$" + t;  // default package
    } else {
      t[dot] = '$';
    }
  }
  return parse(t);
}

}  // namespace faultnav
