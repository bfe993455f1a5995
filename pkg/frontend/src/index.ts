export {
  CartesianImpedance,
  Constants,
  Desk,
  Gripper,
  IntegratedVelocity,
  JointImpedance,
  LogColumns,
  Panda,
  PandaContext,
  Pose,
  QpSolution,
  RobotStateJson,
  Vec,
  controllers,
  EmptyLogError,
  fk,
  ik,
  jacobe,
  jacobm,
  loadConstants,
  logToTable,
  pServo,
  solveQp,
} from "./api.js";
export { Bridge, BridgeError, pythonEnv, pythonExecutable, repoRoot } from "./rpc.js";
export { SimServerProcess } from "./sim.js";
export * as pose from "./math.js";
