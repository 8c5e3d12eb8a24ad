# Copyright 2026 The gridedge_resilience Authors
#
# Licensed under the Apache License, Version 2.0 (the "License"); you may not
# use this file except in compliance with the License. You may obtain a copy of
# the License at http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
# WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
# License for the specific language governing permissions and limitations under
# the License.

import sys
import tempfile

from gridedge_resilience import RunConfig, cmd_run, data_path

# WECC 9-bus study with bandwidth-derived link costs; results land in a temp
# directory unless one is given on the command line.


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="wecc9_")
    config = RunConfig(str(data_path("case9.m")), str(data_path("wecc9.toml")), out, mode="both")
    code = cmd_run(config)
    print(f"exit status {code}; results in {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
