/** Entry point: resolve models, bind the server. */

import { resolveDetectionModel, resolveSynthesisModel } from "./model";
import { createServer } from "./server";

interface CliConfig {
  port: number;
  synthModel: string;
  detectModel: string;
  device: string;
  maxConcurrent: number;
}

function parseArgs(argv: string[]): CliConfig {
  const config: CliConfig = {
    port: 8750,
    synthModel: "procedural",
    detectModel: "saturation",
    device: "cpu",
    maxConcurrent: 2,
  };
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (value === undefined) {
      throw new Error(`missing value for ${key}`);
    }
    switch (key) {
      case "--port":
        config.port = Number(value);
        break;
      case "--synth-model":
        config.synthModel = value;
        break;
      case "--detect-model":
        config.detectModel = value;
        break;
      case "--device":
        config.device = value;
        break;
      case "--max-concurrent":
        config.maxConcurrent = Number(value);
        break;
      default:
        throw new Error(`unknown flag ${key}`);
    }
  }
  if (!Number.isInteger(config.maxConcurrent) || config.maxConcurrent < 1) {
    throw new Error("--max-concurrent must be a positive integer");
  }
  return config;
}

function main(): void {
  let config: CliConfig;
  try {
    config = parseArgs(process.argv.slice(2));
  } catch (err) {
    console.error(`argument error: ${(err as Error).message}`);
    process.exit(2);
  }
  let app;
  try {
    app = createServer({
      synthesis: resolveSynthesisModel(config.synthModel, config.device),
      detection: resolveDetectionModel(config.detectModel),
      maxConcurrent: config.maxConcurrent,
    });
  } catch (err) {
    // Model resolution failures are startup errors, not request errors.
    console.error(`startup error: ${(err as Error).message}`);
    process.exit(1);
  }
  app.listen(config.port, () => {
    console.log(
      `sidecar listening on :${config.port} ` +
        `(synthesis=${config.synthModel}, detection=${config.detectModel}, device=${config.device})`,
    );
  });
}

main();
