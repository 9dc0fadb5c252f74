#!/usr/bin/env node
/** `pmhd-render --spec <figure.json>`: render one figure spec (or an array
 * of them) to SVG; exits nonzero naming the problem on bad specs, missing
 * columns, or empty inputs. */

import { readFileSync, writeFileSync } from "node:fs";
import { render, validateSpec } from "./figure.js";

function main(argv: string[]): number {
  const idx = argv.indexOf("--spec");
  if (idx < 0 || idx + 1 >= argv.length) {
    console.error("usage: pmhd-render --spec <figure.json>");
    return 2;
  }
  let doc: unknown;
  try {
    doc = JSON.parse(readFileSync(argv[idx + 1], "utf8"));
  } catch (err) {
    console.error(`cannot read spec: ${(err as Error).message}`);
    return 2;
  }
  const specs = Array.isArray(doc) ? doc : [doc];
  for (const raw of specs) {
    try {
      const spec = validateSpec(raw);
      const out = render(spec);
      writeFileSync(spec.output, out.svg);
      for (const w of out.warnings) {
        console.error(`warning: ${spec.output}: ${w}`);
      }
      const slope = out.fit ? ` slope=${out.fit.slope.toPrecision(12)}` : "";
      console.log(`wrote ${spec.output}${slope}`);
    } catch (err) {
      console.error(`error: ${(err as Error).message}`);
      return 1;
    }
  }
  return 0;
}

process.exit(main(process.argv.slice(2)));
